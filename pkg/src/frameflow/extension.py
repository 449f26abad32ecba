"""Rotation-group extensions of the base dynamics.

A cocycle assigns to each base point a rotation (discrete time) or a skew
generator (continuous time); the extension advances the base and multiplies
the fiber on the left. Also implements genuine Levi-Civita parallel transport
on the Poincare disk and Birkhoff-average equidistribution statistics of
fiber observables.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import scipy.linalg as sla

from .base_dynamics import (
    DiskPoint,
    TorusPoint,
    UnitTangent,
    ToralAutomorphism,
    cat_step,
    geodesic_flow,
    hyperbolic_distance,
    MobiusIsometry,
)


# ---------------------------------------------------------------------------
# matrix validators and helpers
# ---------------------------------------------------------------------------

def rotation_residual(R: np.ndarray) -> float:
    """Sup-norm deviation of R^T R from the identity."""
    R = np.asarray(R)
    return float(np.abs(R.T @ R - np.eye(R.shape[0])).max())


def check_rotation(R: np.ndarray, tol: float = 1e-10) -> None:
    if rotation_residual(R) > tol:
        raise ValueError(f"orthogonality residual exceeds {tol}")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError("determinant must be +1")


def check_skew(S: np.ndarray, tol: float = 1e-12) -> None:
    if float(np.abs(S + S.T).max()) > tol:
        raise ValueError(f"skew-symmetry residual exceeds {tol}")


def project_rotation(R: np.ndarray) -> np.ndarray:
    """Nearest rotation by polar decomposition (drift control)."""
    u, _, vt = np.linalg.svd(R)
    out = u @ vt
    if np.linalg.det(out) < 0:
        u[:, -1] = -u[:, -1]
        out = u @ vt
    return out


def skew_basis(m: int) -> list[np.ndarray]:
    """Elementary skew matrices E_ij - E_ji, i < j."""
    out = []
    for i in range(m):
        for j in range(i + 1, m):
            S = np.zeros((m, m))
            S[i, j] = 1.0
            S[j, i] = -1.0
            out.append(S)
    return out


def standard_complex_structure(m: int) -> np.ndarray:
    """Block-diagonal J with 2x2 blocks [[0, -1], [1, 0]]; requires even m."""
    if m % 2:
        raise ValueError("complex structure needs even dimension")
    J = np.zeros((m, m))
    for i in range(0, m, 2):
        J[i, i + 1] = -1.0
        J[i + 1, i] = 1.0
    return J


def complexify(M: np.ndarray) -> np.ndarray:
    """Real 2q x 2q matrix of a complex q x q matrix, coordinates interleaved."""
    q = M.shape[0]
    R = np.zeros((2 * q, 2 * q))
    R[0::2, 0::2] = M.real
    R[0::2, 1::2] = -M.imag
    R[1::2, 0::2] = M.imag
    R[1::2, 1::2] = M.real
    return R


def unitary_algebra_basis(q: int) -> list[np.ndarray]:
    """Realified basis of the skew-Hermitian q x q matrices (dimension q^2)."""
    out = []
    for i in range(q):
        H = np.zeros((q, q), dtype=complex)
        H[i, i] = 1j
        out.append(complexify(H))
    for i in range(q):
        for j in range(i + 1, q):
            H = np.zeros((q, q), dtype=complex)
            H[i, j] = 1.0
            H[j, i] = -1.0
            out.append(complexify(H))
            H = np.zeros((q, q), dtype=complex)
            H[i, j] = 1j
            H[j, i] = 1j
            out.append(complexify(H))
    return out


def so3_exp_batch(S: np.ndarray) -> np.ndarray:
    """Rodrigues exponential for a stack (N, 3, 3) of so(3) matrices."""
    w = np.stack([S[:, 2, 1], S[:, 0, 2], S[:, 1, 0]], axis=1)
    th = np.linalg.norm(w, axis=1)
    N = S.shape[0]
    a = np.ones(N)
    b = np.full(N, 0.5)
    nz = th > 1e-150
    a[nz] = np.sin(th[nz]) / th[nz]
    b[nz] = (1.0 - np.cos(th[nz])) / th[nz] ** 2
    S2 = np.einsum("nij,njk->nik", S, S)
    return np.eye(3)[None] + a[:, None, None] * S + b[:, None, None] * S2


def skew_exp_batch(S: np.ndarray) -> np.ndarray:
    """Exponentials of a stack of skew matrices; Rodrigues for m=3, else expm."""
    if S.shape[1] == 3:
        return so3_exp_batch(S)
    return np.array([sla.expm(s) for s in S])


# ---------------------------------------------------------------------------
# cocycles
# ---------------------------------------------------------------------------

def _base_coords(base) -> np.ndarray:
    if isinstance(base, TorusPoint):
        return base.coords
    if isinstance(base, UnitTangent):
        return np.array([base.base.z.real, base.base.z.imag, base.angle])
    return np.asarray(base, dtype=float)


@dataclass(frozen=True)
class Cocycle:
    """Rule generating the fiber motion over the base dynamics.

    ``eval`` maps base coordinates to a rotation (kind 'discrete') or to a
    skew generator (kind 'continuous'). ``eval_batch`` takes an (N, d) array
    of base coordinates; the default loops, trigonometric cocycles vectorize.
    ``smoothness_certificate`` is a Lipschitz bound for the generator data,
    finite by construction for every cocycle built here.
    """

    kind: str
    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    smoothness_certificate: float
    name: str = "cocycle"
    _batch: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in ("discrete", "continuous"):
            raise ValueError(f"unknown cocycle kind {self.kind!r}")

    def __call__(self, base) -> np.ndarray:
        return self.eval(_base_coords(base))

    def eval_batch(self, coords: np.ndarray) -> np.ndarray:
        if self._batch is not None:
            return self._batch(coords)
        return np.array([self.eval(c) for c in coords])


def trivial_cocycle(m: int, kind: str = "discrete") -> Cocycle:
    I = np.eye(m)
    Z = np.zeros((m, m))
    val = I if kind == "discrete" else Z
    return Cocycle(kind, m, lambda x: val, 0.0, name="trivial",
                   _batch=lambda X: np.broadcast_to(val, (len(X), m, m)).copy())


def constant_cocycle(value: np.ndarray, kind: str = "discrete") -> Cocycle:
    value = np.asarray(value, dtype=float)
    if kind == "discrete":
        check_rotation(value)
    else:
        check_skew(value)
    m = value.shape[0]
    return Cocycle(kind, m, lambda x: value, 0.0, name="constant",
                   _batch=lambda X: np.broadcast_to(value, (len(X), m, m)).copy())


def _trig_field(basis: list[np.ndarray], seed: int, n_modes: int, amplitude: float,
                n_vars: int = 2):
    """Seeded trigonometric-polynomial coefficients over the torus coordinates."""
    rng = np.random.default_rng(seed)
    nb = len(basis)
    freqs = rng.integers(-n_modes, n_modes + 1, size=(nb, 3, n_vars)).astype(float)
    coefs = rng.normal(size=(nb, 3)) * (amplitude / 3.0)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(nb, 3))
    B = np.array(basis)

    def gen_batch(X):
        args = 2.0 * np.pi * np.einsum("bmc,nc->bmn", freqs, X[:, :n_vars]) + phases[:, :, None]
        cvals = np.einsum("bm,bmn->bn", coefs, np.cos(args))
        return np.einsum("bn,bij->nij", cvals, B)

    def gen(x):
        return gen_batch(x[None])[0]

    # |a(x) - a(y)| <= L |x - y| with L summing gradient bounds of every mode
    lip = float(sum(
        np.abs(coefs[b]) @ (2.0 * np.pi * np.linalg.norm(freqs[b], axis=1)) * np.abs(B[b]).max()
        for b in range(nb)
    ))
    return gen, gen_batch, lip


def random_rotation_cocycle(m: int, seed: int, n_modes: int = 2,
                            amplitude: float = 0.8) -> Cocycle:
    """Discrete cocycle exp(a(x)) with a seeded trigonometric skew field a."""
    gen, gen_batch, lip = _trig_field(skew_basis(m), seed, n_modes, amplitude)
    return Cocycle(
        "discrete", m,
        lambda x: sla.expm(gen(x)),
        lip,
        name=f"random_trig(m={m}, seed={seed})",
        _batch=lambda X: skew_exp_batch(gen_batch(X)),
    )


def random_generator_cocycle(m: int, seed: int, n_modes: int = 2,
                             amplitude: float = 0.8, n_vars: int = 3) -> Cocycle:
    """Continuous-kind cocycle: a seeded trigonometric skew generator field."""
    gen, gen_batch, lip = _trig_field(skew_basis(m), seed, n_modes, amplitude, n_vars)
    return Cocycle("continuous", m, gen, lip,
                   name=f"random_generator(m={m}, seed={seed})", _batch=gen_batch)


def kahler_like_cocycle(m: int, base_kind: str = "discrete", seed: int = 0,
                        n_modes: int = 2, amplitude: float = 0.8) -> Cocycle:
    """Cocycle whose values commute with the standard complex structure J.

    Generators are drawn from the realified skew-Hermitian algebra, so every
    value lies in the unitary subgroup of SO(m) and the pairing matrix
    fiber^T J fiber is frozen along orbits. Requires even m.
    """
    if m % 2:
        raise ValueError("kahler-like cocycle needs even fiber dimension")
    n_vars = 2 if base_kind == "discrete" else 3
    basis = unitary_algebra_basis(m // 2)
    gen, gen_batch, lip = _trig_field(basis, seed, n_modes, amplitude, n_vars)
    if base_kind == "continuous":
        return Cocycle("continuous", m, gen, lip,
                       name=f"kahler(m={m}, seed={seed})", _batch=gen_batch)
    return Cocycle(
        "discrete", m,
        lambda x: sla.expm(gen(x)),
        lip,
        name=f"kahler(m={m}, seed={seed})",
        _batch=lambda X: skew_exp_batch(gen_batch(X)),
    )


# ---------------------------------------------------------------------------
# extended states and stepping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtendedState:
    """Base phase point together with a fiber rotation."""

    base: TorusPoint | UnitTangent
    fiber: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.fiber, dtype=float)
        check_rotation(F)
        object.__setattr__(self, "fiber", F)

    def right_translate(self, g: np.ndarray) -> "ExtendedState":
        return ExtendedState(self.base, self.fiber @ g)


class KindMismatchError(TypeError):
    """Cocycle kind incompatible with the base dynamics."""


def step_extension(s: ExtendedState, c: Cocycle, dt_or_n,
                   A: ToralAutomorphism | None = None,
                   substep: float = 1e-2,
                   renorm_every: int = 64) -> ExtendedState:
    """Advance the extension: base by the base dynamics, fiber on the left.

    Discrete kind: ``dt_or_n`` is an iterate count and ``A`` must be given.
    Continuous kind: ``dt_or_n`` is a time; the fiber solves R' = a(x_t) R
    by a classical 4th-order step of size <= ``substep`` with periodic
    re-orthonormalization. The base of the output always equals the base
    dynamics applied to the base of the input.
    """
    if c.kind == "discrete":
        if not isinstance(s.base, TorusPoint):
            raise KindMismatchError("discrete cocycle needs a torus base point")
        if A is None:
            raise ValueError("discrete stepping needs the automorphism")
        n = int(dt_or_n)
        p = s.base
        F = s.fiber.copy()
        for i in range(n):
            F = c.eval(p.coords) @ F
            p = cat_step(p, A)
            if (i + 1) % renorm_every == 0:
                F = project_rotation(F)
        return ExtendedState(p, project_rotation(F) if n >= renorm_every else F)

    if not isinstance(s.base, UnitTangent):
        raise KindMismatchError("continuous cocycle needs a disk unit tangent")
    t = float(dt_or_n)
    n_sub = max(1, int(math.ceil(abs(t) / substep)))
    h = t / n_sub
    state = s.base
    F = s.fiber.copy()
    for i in range(n_sub):
        a0 = c.eval(_base_coords(state))
        half = geodesic_flow(state, h / 2.0)
        a1 = c.eval(_base_coords(half))
        nxt = geodesic_flow(state, h)
        a2 = c.eval(_base_coords(nxt))
        k1 = a0 @ F
        k2 = a1 @ (F + 0.5 * h * k1)
        k3 = a1 @ (F + 0.5 * h * k2)
        k4 = a2 @ (F + h * k3)
        F = F + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        state = nxt
        if (i + 1) % renorm_every == 0:
            F = project_rotation(F)
    return ExtendedState(state, project_rotation(F))


def cocycle_product(c: Cocycle, A: ToralAutomorphism, coords: np.ndarray,
                    n: int) -> np.ndarray:
    """Ordered product A(f^{n-1}x) ... A(x) of discrete cocycle values."""
    P = np.eye(c.dim)
    x = np.asarray(coords, dtype=float) % 1.0
    for i in range(n):
        P = c.eval(x) @ P
        x = (A.matrix @ x) % 1.0
        if (i + 1) % 64 == 0:
            P = project_rotation(P)
    return P


def simulate_cat_extension(p0: TorusPoint, c: Cocycle, A: ToralAutomorphism,
                           n_steps: int, fiber0: np.ndarray | None = None,
                           renorm_every: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Full orbit of the discrete extension, vectorized where possible.

    Returns (base, fibers): base is (n_steps, 2), fibers is (n_steps, m, m)
    with fibers[i] the fiber BEFORE step i (fibers[0] is the initial fiber).
    """
    if c.kind != "discrete":
        raise KindMismatchError("orbit engine is for discrete cocycles")
    base = np.empty((n_steps, 2))
    x, y = p0.x, p0.y
    M = A.matrix
    a, b, cc, d = M[0, 0], M[0, 1], M[1, 0], M[1, 1]
    for i in range(n_steps):
        base[i, 0] = x
        base[i, 1] = y
        x, y = (a * x + b * y) % 1.0, (cc * x + d * y) % 1.0
    values = c.eval_batch(base)
    m = c.dim
    fibers = np.empty((n_steps, m, m))
    cur = np.eye(m) if fiber0 is None else np.asarray(fiber0, dtype=float).copy()
    for i in range(n_steps):
        fibers[i] = cur
        cur = values[i] @ cur
        if (i + 1) % renorm_every == 0:
            cur = project_rotation(cur)
    return base, fibers


# ---------------------------------------------------------------------------
# parallel transport on the disk
# ---------------------------------------------------------------------------

def parallel_transport_disk(curve, v0: complex) -> complex:
    """Levi-Civita parallel transport of a chart tangent vector along a curve.

    ``curve`` is a sampled path of DiskPoints (or complex numbers) with
    hyperbolic spacing below 1e-2. The transport equation is scalar linear,
    v' = -2 conj(z) z' v / (1 - |z|^2), so the solution is v0 times the
    exponential of a contour integral; the integral is evaluated by composite
    Simpson over sample triples and its real part is taken in closed form,
    which preserves the hyperbolic norm to rounding.
    """
    zs = np.asarray([p.z if isinstance(p, DiskPoint) else complex(p) for p in curve])
    if np.any(np.abs(zs) >= 1.0):
        raise ValueError("curve leaves the disk")
    steps = np.array([hyperbolic_distance(zs[i], zs[i + 1]) for i in range(len(zs) - 1)])
    if len(steps) and steps.max() >= 1e-2 + 1e-12:
        raise ValueError("curve samples too sparse (hyperbolic step >= 1e-2)")
    f = -2.0 * np.conj(zs) / (1.0 - np.abs(zs) ** 2)
    n = len(zs) - 1
    m = n if n % 2 == 0 else n - 1
    im_total = 0.0
    if m > 0:
        z0, z1, z2 = zs[0:m - 1:2], zs[1:m:2], zs[2:m + 1:2]
        f0, f1, f2 = f[0:m - 1:2], f[1:m:2], f[2:m + 1:2]
        d0 = (-3.0 * z0 + 4.0 * z1 - z2) / 2.0
        d1 = (z2 - z0) / 2.0
        d2 = (z0 - 4.0 * z1 + 3.0 * z2) / 2.0
        contrib = (f0 * d0 + 4.0 * f1 * d1 + f2 * d2) / 3.0
        im_total += float(np.sum(contrib.imag))
    if m < n:  # odd tail: single midpoint-rule segment
        za, zb = zs[-2], zs[-1]
        zm = 0.5 * (za + zb)
        im_total += float((-2.0 * np.conj(zm) / (1.0 - abs(zm) ** 2) * (zb - za)).imag)
    re_total = math.log((1.0 - abs(zs[-1]) ** 2) / (1.0 - abs(zs[0]) ** 2))
    return complex(v0) * np.exp(re_total + 1j * im_total)


def geodesic_segment(a: complex, b: complex, max_step: float = 9e-3) -> np.ndarray:
    """Points along the geodesic from a to b, even segment count."""
    T = MobiusIsometry.translation(a)
    w = T.inverse().apply(b)
    d = hyperbolic_distance(a, b)
    n = max(2, int(math.ceil(d / max_step)))
    if n % 2:
        n += 1
    ss = np.linspace(0.0, d, n + 1)
    phase = cmath_phase_safe(w)
    zz = np.tanh(ss / 2.0) * np.exp(1j * phase)
    M = T.mat
    return (M[0, 0] * zz + M[0, 1]) / (M[1, 0] * zz + M[1, 1])


def cmath_phase_safe(w: complex) -> float:
    return math.atan2(w.imag, w.real) if w != 0 else 0.0


def geodesic_triangle(a: complex, b: complex, c: complex,
                      max_step: float = 9e-3) -> np.ndarray:
    """Closed sampled boundary of the geodesic triangle abc."""
    s1 = geodesic_segment(a, b, max_step)
    s2 = geodesic_segment(b, c, max_step)
    s3 = geodesic_segment(c, a, max_step)
    return np.concatenate([s1, s2[1:], s3[1:]])


def triangle_angle(at: complex, b: complex, c: complex) -> float:
    """Interior angle of the geodesic triangle at vertex ``at``."""
    Ti = MobiusIsometry.translation(at).inverse()
    wb, wc = Ti.apply(b), Ti.apply(c)
    ang = abs(cmath_phase_safe(wb / wc))
    return min(ang, 2.0 * math.pi - ang)


def triangle_area(a: complex, b: complex, c: complex) -> float:
    """Hyperbolic area by the angle defect (curvature -1)."""
    return math.pi - (triangle_angle(a, b, c) + triangle_angle(b, c, a)
                      + triangle_angle(c, a, b))


# ---------------------------------------------------------------------------
# equidistribution statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EquidistributionStat:
    name: str
    average: float
    standard_error: float
    n_samples: int

    def to_json(self) -> dict:
        return {"name": self.name, "average": self.average,
                "standard_error": self.standard_error, "n_samples": self.n_samples}


def matrix_entry_test(i: int, j: int):
    """Matrix-coefficient observable R -> R[i, j] on a fiber stack."""
    def obs(fibers: np.ndarray) -> np.ndarray:
        return fibers[..., i, j]
    obs.__name__ = f"entry_{i}{j}"
    return obs


def j_pairing_test(m: int):
    """Observable (R^T J R)[1, 0]; frozen along kahler-like extensions."""
    J = standard_complex_structure(m)
    def obs(fibers: np.ndarray) -> np.ndarray:
        # row 1 of R^T dotted through J with column 0 of R
        return np.einsum("ni,ij,nj->n", fibers[:, :, 1], J, fibers[:, :, 0])
    obs.__name__ = "j_pairing"
    return obs


def fiber_equidistribution(fibers, tests, batch_count: int = 100) -> list[EquidistributionStat]:
    """Birkhoff averages of fiber observables with batch-means errors.

    ``fibers`` is an (N, m, m) stack or an iterable of ExtendedState. For an
    ergodic extension the averages of nontrivial matrix coefficients decay at
    the 1/sqrt(N) scale; a frozen observable keeps its initial value.
    """
    if not tests:
        raise ValueError("need at least one observable")
    if not isinstance(fibers, np.ndarray):
        fibers = np.array([s.fiber for s in fibers])
    N = len(fibers)
    if N < 1000:
        raise ValueError("orbit too short for equidistribution statistics")
    usable = (N // batch_count) * batch_count
    out = []
    for obs in tests:
        vals = np.asarray(obs(fibers), dtype=float)
        avg = float(vals.mean())
        bm = vals[:usable].reshape(batch_count, -1).mean(axis=1)
        se = float(bm.std(ddof=1) / math.sqrt(batch_count))
        out.append(EquidistributionStat(getattr(obs, "__name__", "obs"), avg, se, N))
    return out


# ---------------------------------------------------------------------------
# orbit serialization
# ---------------------------------------------------------------------------

def write_orbit_csv(path, base: np.ndarray, fibers: np.ndarray,
                    header_meta: dict | None = None) -> None:
    """Orbit dump: step index, base coordinates, row-major fiber entries."""
    m = fibers.shape[1]
    base_cols = [f"base_{i}" for i in range(base.shape[1])]
    fib_cols = [f"f_{i}{j}" for i in range(m) for j in range(m)]
    with open(path, "w", newline="") as fh:
        for key, val in (header_meta or {}).items():
            fh.write(f"# {key}={val}\n")
        writer = csv.writer(fh)
        writer.writerow(["step", *base_cols, *fib_cols])
        for idx in range(len(base)):
            row = [str(idx)]
            row += [f"{v:.17g}" for v in base[idx]]
            row += [f"{v:.17g}" for v in fibers[idx].ravel()]
            writer.writerow(row)
