"""Holonomy representation of homoclinic orbits and transitivity-group estimation.

Stable/unstable holonomies are limits of cocycle-product ratios along leaf
orbits; composing them through a homoclinic point of the fixed point gives a
rotation per homoclinic orbit. The group generated by these rotations is
estimated at the Lie-algebra level: matrix logarithms are harvested from
words driven back inside the injectivity radius, the span is closed under
brackets, and invariant tensors of the resulting subalgebra are read off
from joint kernels of the induced representation action.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.linalg as sla

from .base_dynamics import (
    HomoclinicPoint,
    ToralAutomorphism,
    fixed_point_orbit,
    stable_orbit,
    unstable_backward_orbit,
)
from .extension import Cocycle, project_rotation

REP_TAGS = ("standard", "lambda2", "lambda3", "sym2_0")


class HolonomyError(RuntimeError):
    """Holonomy partial products failed to reach the requested tolerance."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or []


@dataclass(frozen=True)
class HolonomyResult:
    """Converged holonomy limit with its truncation diagnostics."""

    value: np.ndarray
    truncation_depth: int
    cauchy_residual: float
    residual_history: tuple[float, ...] = ()


def _holonomy_limit(apply_step, tol: float, depth_cap: int,
                    record_history: bool, m: int) -> HolonomyResult:
    U = np.eye(m)
    V = np.eye(m)
    P_old = None
    history = []
    for n in range(depth_cap):
        U, V = apply_step(n, U, V)
        if (n + 1) % 64 == 0:
            U = project_rotation(U)
            V = project_rotation(V)
        P = V.T @ U
        if P_old is not None:
            resid = float(np.abs(P - P_old).max())
            if record_history:
                history.append(resid)
            if resid < tol:
                return HolonomyResult(project_rotation(P), n + 1, resid, tuple(history))
        P_old = P
    raise HolonomyError(
        f"no convergence within depth cap {depth_cap}", residuals=history)


def stable_holonomy(x_orbit: np.ndarray, y_orbit: np.ndarray, c: Cocycle,
                    tol: float = 1e-12, depth_cap: int = 200,
                    record_history: bool = False,
                    check_approach: bool = True) -> HolonomyResult:
    """Limit of [A^(n)(y)]^{-1} A^(n)(x) along forward orbits on one stable leaf.

    ``x_orbit``/``y_orbit`` are (depth, 2) arrays of forward iterates; use the
    exact leaf parametrizations from base_dynamics so that roundoff is not
    amplified along the unstable direction. The result transports the fiber
    over x to the fiber over y within the extension's stable leaf.
    """
    x_orbit = np.asarray(x_orbit, dtype=float)
    y_orbit = np.asarray(y_orbit, dtype=float)
    if check_approach and len(x_orbit) > 30:
        d = np.abs(x_orbit[30] - y_orbit[30]) % 1.0
        d = np.minimum(d, 1.0 - d)
        if np.linalg.norm(d) > 1e-6:
            raise ValueError("points do not approach along a stable leaf")
    depth = min(len(x_orbit), len(y_orbit), depth_cap)

    def step(n, U, V):
        return c.eval(x_orbit[n]) @ U, c.eval(y_orbit[n]) @ V

    return _holonomy_limit(step, tol, depth, record_history, c.dim)


def unstable_holonomy(x_orbit_back: np.ndarray, y_orbit_back: np.ndarray, c: Cocycle,
                      tol: float = 1e-12, depth_cap: int = 200,
                      record_history: bool = False,
                      check_approach: bool = True) -> HolonomyResult:
    """Mirror of the stable holonomy along backward orbits on an unstable leaf.

    Orbit arrays list the backward iterates: entry i is the (-i)-th image.
    """
    x_orbit_back = np.asarray(x_orbit_back, dtype=float)
    y_orbit_back = np.asarray(y_orbit_back, dtype=float)
    if check_approach and len(x_orbit_back) > 30:
        d = np.abs(x_orbit_back[30] - y_orbit_back[30]) % 1.0
        d = np.minimum(d, 1.0 - d)
        if np.linalg.norm(d) > 1e-6:
            raise ValueError("points do not approach along an unstable leaf")
    depth = min(len(x_orbit_back), len(y_orbit_back), depth_cap)

    def step(n, U, V):
        # backward cocycle: deepest inverse factor multiplies on the left
        return c.eval(x_orbit_back[n + 1]).T @ U, c.eval(y_orbit_back[n + 1]).T @ V

    return _holonomy_limit(step, tol, depth - 1, record_history, c.dim)


def brin_rho(p: HomoclinicPoint, A: ToralAutomorphism, c: Cocycle,
             tol: float = 1e-12, depth_cap: int = 200,
             cut: tuple[int, int] = (0, 0)) -> np.ndarray:
    """Holonomy of the homoclinic orbit of ``p``, anchored at the fixed point.

    Composes the unstable holonomy from the fixed point out to a backward
    iterate of p, the finite transition product along the orbit, and the
    stable holonomy back to the fixed point. ``cut=(j, k)`` selects the
    backward/forward cut points; the result is cut-independent up to a few
    multiples of ``tol``.
    """
    j, k = cut
    if j < 0 or k < 0:
        raise ValueError("cut offsets must be nonnegative")
    lam_u = A.unstable_eigenvalue
    lam_s = A.stable_eigenvalue
    depth = depth_cap + 1

    # unstable holonomy 0 -> f^{-j} p over backward orbits
    back_p = unstable_backward_orbit(A, p.unstable_param * lam_u ** (-j), depth)
    hu = unstable_holonomy(fixed_point_orbit(depth), back_p, c, tol, depth_cap)

    # transition product A^{(j+k)} along the orbit from f^{-j} p to f^{k} p
    W = np.eye(c.dim)
    for i in range(j + k):
        step = i - j
        if step < 0:
            coords = (p.unstable_param * lam_u ** step * A.unstable_dir) % 1.0
        else:
            coords = (p.stable_param * lam_s ** step * A.stable_dir) % 1.0
        W = c.eval(coords) @ W

    # stable holonomy f^{k} p -> 0 over forward orbits
    fwd_p = stable_orbit(A, p.stable_param * lam_s ** k, depth)
    hs = stable_holonomy(fwd_p, fixed_point_orbit(depth), c, tol, depth_cap)

    return project_rotation(hs.value @ W @ hu.value)


@dataclass(frozen=True)
class BrinWord:
    """Formal word of homoclinic letters with nonnegative powers."""

    letters: tuple[tuple[HomoclinicPoint, int], ...]
    value: np.ndarray

    @classmethod
    def from_rhos(cls, letters, rho_values) -> "BrinWord":
        """Build a word from (point, power) pairs and their holonomy values."""
        V = np.eye(rho_values[0].shape[0])
        for (pt, power), rho in zip(letters, rho_values):
            if power < 0:
                raise ValueError("monoid words use nonnegative powers")
            V = np.linalg.matrix_power(rho, power) @ V
        return cls(tuple(letters), V)

    def check(self, rho_values, tol: float = 1e-9) -> bool:
        V = np.eye(self.value.shape[0])
        for (pt, power), rho in zip(self.letters, rho_values):
            V = np.linalg.matrix_power(rho, power) @ V
        return float(np.abs(V - self.value).max()) < tol


# ---------------------------------------------------------------------------
# Lie-algebra estimation
# ---------------------------------------------------------------------------

class InsufficientDataError(RuntimeError):
    """No word could be brought inside the logarithm injectivity radius."""


@dataclass(frozen=True)
class SubgroupEstimate:
    """Orthonormal basis of the Lie algebra generated by observed holonomies."""

    algebra_basis: tuple[np.ndarray, ...]
    dimension: int
    generator_count: int

    def basis_stack(self) -> np.ndarray:
        m = self.algebra_basis[0].shape[0] if self.algebra_basis else 0
        return np.array([b for b in self.algebra_basis]).reshape(self.dimension, m, m)


def _schur_angles(w: np.ndarray):
    """Real Schur data of an orthogonal matrix: frame, angles, block offsets."""
    T, Q = sla.schur(w, output="real")
    angles, blocks = [], []
    i = 0
    n = w.shape[0]
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > 1e-12:
            angles.append(math.atan2(T[i + 1, i], T[i, i]))
            blocks.append(i)
            i += 2
        else:
            i += 1
    return Q, np.array(angles), blocks


def _log_of_power(Q, angles, blocks, k, m):
    S = np.zeros((m, m))
    wrapped = np.angle(np.exp(1j * k * angles))
    for th, i in zip(wrapped, blocks):
        S[i, i + 1] = -th
        S[i + 1, i] = th
    return Q @ S @ Q.T


def orthogonal_log(w: np.ndarray) -> np.ndarray:
    """Principal skew logarithm of a rotation via the real Schur form."""
    Q, angles, blocks = _schur_angles(w)
    return _log_of_power(Q, angles, blocks, 1, w.shape[0])


def _span_rank(rows: np.ndarray, rel_tol: float = 1e-6):
    if len(rows) == 0:
        return 0, rows
    U, s, Vt = np.linalg.svd(rows, full_matrices=False)
    if s[0] < 1e-9:
        return 0, Vt[:0]
    r = int(np.sum(s > rel_tol * s[0]))
    return r, Vt[:r]


def estimate_transitivity_group(rhos: list[np.ndarray], *, seed: int = 0,
                                injectivity_radius: float = 0.5,
                                word_length_cap: int = 6,
                                n_random_words: int = 120,
                                power_cap: int = 2000,
                                logs_per_word: int = 4,
                                bracket_tol: float = 1e-6) -> SubgroupEstimate:
    """Estimate the Lie algebra of the group generated by the holonomies.

    Monoid words in the generators are formed (seeded, nonnegative powers
    only); each word is raised to powers until it recurs inside the
    injectivity radius, where the principal logarithm is well conditioned.
    The collected skew logarithms are spanned, closed under brackets, and
    orthonormalized in the Frobenius inner product. Only the algebra of the
    identity component is estimated; disconnected groups are out of scope.
    """
    if not rhos:
        raise ValueError("need at least one holonomy value")
    m = rhos[0].shape[0]
    dim_cap = m * (m - 1) // 2
    rng = np.random.default_rng(seed)

    words = [(i,) for i in range(len(rhos))]
    for _ in range(n_random_words):
        length = int(rng.integers(1, word_length_cap + 1))
        words.append(tuple(rng.integers(0, len(rhos), length)))

    logs = []
    any_in_radius = False
    for wd in words:
        W = np.eye(m)
        for i in wd:
            W = W @ rhos[i]
        Q, angles, blocks = _schur_angles(W)
        if len(angles) == 0:   # word is (a reflection-free) identity-like element
            any_in_radius = True
            continue
        found = 0
        for k in range(1, power_cap + 1):
            wrapped = np.angle(np.exp(1j * k * angles))
            frob = math.sqrt(float(np.sum(4.0 * (1.0 - np.cos(wrapped)))))
            if frob < injectivity_radius:
                any_in_radius = True
                S = _log_of_power(Q, angles, blocks, k, m)
                if float(np.abs(S).max()) > 1e-13:
                    logs.append(S.ravel())
                found += 1
                if found >= logs_per_word:
                    break
        if len(logs) > 40 * dim_cap:
            break
    if not any_in_radius:
        raise InsufficientDataError(
            "no word reached the injectivity radius; supply more generators")

    rank, Vt = _span_rank(np.array(logs) if logs else np.zeros((0, m * m)))
    # bracket closure to a fixed point, dimension capped by the ambient algebra
    while rank and rank < dim_cap:
        basis = Vt.reshape(rank, m, m)
        extra = []
        for i in range(rank):
            for j in range(i + 1, rank):
                Bkt = basis[i] @ basis[j] - basis[j] @ basis[i]
                v = Bkt.ravel()
                resid = v - Vt.T @ (Vt @ v)
                if np.linalg.norm(resid) > bracket_tol:
                    extra.append(v)
        if not extra:
            break
        rank, Vt = _span_rank(np.vstack([Vt, np.array(extra)]))

    basis = []
    for row in Vt:
        S = row.reshape(m, m)
        S = 0.5 * (S - S.T)          # exact skew despite rounding
        basis.append(S / np.linalg.norm(S))
    # Frobenius re-orthonormalization of the skew-projected rows
    if basis:
        Mrows = np.array([b.ravel() for b in basis])
        q, _ = np.linalg.qr(Mrows.T)
        basis = [q[:, i].reshape(m, m) for i in range(rank)]
        basis = [0.5 * (b - b.T) for b in basis]
        basis = [b / np.linalg.norm(b) for b in basis]
    return SubgroupEstimate(tuple(basis), rank, len(rhos))


def ergodicity_verdict(H: SubgroupEstimate, m: int,
                       min_generators: int = 5) -> str:
    """'ergodic' iff the algebra saturates so(m); starved data is inconclusive."""
    full = m * (m - 1) // 2
    if H.dimension >= full:
        return "ergodic"
    if H.generator_count >= min_generators:
        return "not_ergodic"
    return "inconclusive"


# ---------------------------------------------------------------------------
# representation actions and invariant tensors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InvariantTensor:
    """Unit-norm tensor annihilated by the estimated algebra action."""

    representation: str
    coefficients: np.ndarray
    residual: float


def _lambda2_action(xi: np.ndarray) -> np.ndarray:
    """Action on antisymmetric matrices W -> [xi, W], in a flattened basis."""
    m = xi.shape[0]
    pairs = list(combinations(range(m), 2))
    pos = {p: i for i, p in enumerate(pairs)}
    M = np.zeros((len(pairs), len(pairs)))
    for a, (i, j) in enumerate(pairs):
        for l in range(m):
            for (src, other, slot) in ((i, j, 0), (j, i, 1)):
                tgt = (l, other) if slot == 0 else (other, l)
                if tgt[0] == tgt[1]:
                    continue
                sign = 1.0
                key = tgt
                if key[0] > key[1]:
                    key = (key[1], key[0])
                    sign = -1.0
                M[a, pos[key]] += xi[src, l] * sign
    return M


def _perm_sign_sorted(tpl):
    sign = 1
    lst = list(tpl)
    for i in range(len(lst)):
        for j in range(len(lst) - 1 - i):
            if lst[j] > lst[j + 1]:
                lst[j], lst[j + 1] = lst[j + 1], lst[j]
                sign = -sign
    return tuple(lst), sign


def _lambda3_action(xi: np.ndarray) -> np.ndarray:
    m = xi.shape[0]
    triples = list(combinations(range(m), 3))
    pos = {t: i for i, t in enumerate(triples)}
    M = np.zeros((len(triples), len(triples)))
    for a, (i, j, k) in enumerate(triples):
        for slot, (src, o1, o2) in enumerate(((i, j, k), (j, i, k), (k, i, j))):
            for l in range(m):
                tgt = (l, o1, o2)
                if len(set(tgt)) < 3:
                    continue
                key, sign = _perm_sign_sorted(tgt)
                M[a, pos[key]] += xi[src, l] * sign
    return M


def _sym2_basis(m: int) -> list[np.ndarray]:
    """Orthonormal basis of trace-free symmetric matrices."""
    out = []
    for i in range(m):
        for j in range(i + 1, m):
            B = np.zeros((m, m))
            B[i, j] = B[j, i] = 1.0 / math.sqrt(2.0)
            out.append(B)
    # diagonal trace-free directions via QR of the complement of the identity
    diag = np.eye(m)
    ones = np.ones((m, 1)) / math.sqrt(m)
    proj = diag - ones @ ones.T @ diag
    q, r = np.linalg.qr(proj)
    for i in range(m - 1):
        out.append(np.diag(q[:, i]))
    return out


def _sym2_action(xi: np.ndarray) -> np.ndarray:
    basis = _sym2_basis(xi.shape[0])
    d = len(basis)
    M = np.zeros((d, d))
    for b, B in enumerate(basis):
        img = xi @ B - B @ xi
        for a, A2 in enumerate(basis):
            M[a, b] = float(np.sum(A2 * img))
    return M


def rep_action_matrix(xi: np.ndarray, rep: str) -> np.ndarray:
    """Matrix of the induced algebra action on the chosen representation."""
    if rep == "standard":
        return np.asarray(xi, dtype=float)
    if rep == "lambda2":
        return _lambda2_action(xi)
    if rep == "lambda3":
        return _lambda3_action(xi)
    if rep == "sym2_0":
        return _sym2_action(xi)
    raise ValueError(f"unknown representation tag {rep!r}")


def _coords_to_tensor(rep: str, v: np.ndarray, m: int):
    if rep == "standard":
        return v / np.linalg.norm(v)
    if rep == "lambda2":
        W = np.zeros((m, m))
        for a, (i, j) in enumerate(combinations(range(m), 2)):
            W[i, j] = v[a]
            W[j, i] = -v[a]
        return W / np.linalg.norm(W)
    if rep == "lambda3":
        return v / np.linalg.norm(v)
    if rep == "sym2_0":
        basis = _sym2_basis(m)
        S = sum(c * B for c, B in zip(v, basis))
        return S / np.linalg.norm(S)
    raise ValueError(rep)


def fixed_tensors(H, rep: str, m: int, zero_tol: float = 1e-8) -> list[InvariantTensor]:
    """Joint kernel of the algebra action on the chosen representation.

    ``H`` is a SubgroupEstimate or an explicit list of skew generators. For
    the lambda3 representation the dimension is capped at m <= 16. An empty
    list means the representation carries no invariant vector.
    """
    gens = list(H.algebra_basis) if isinstance(H, SubgroupEstimate) else list(H)
    if rep == "lambda3" and m > 16:
        raise ValueError("lambda3 representation capped at m <= 16")
    if not gens:
        raise ValueError("empty generator set: invariants are unconstrained")
    acts = [rep_action_matrix(np.asarray(g, dtype=float), rep) for g in gens]
    stacked = np.vstack(acts)
    U, s, Vt = np.linalg.svd(stacked)
    d = stacked.shape[1]
    null_rows = [Vt[i] for i in range(d) if (i >= len(s) or s[i] < zero_tol)]
    out = []
    for v in null_rows:
        resid = max(float(np.linalg.norm(A @ v)) for A in acts)
        out.append(InvariantTensor(rep, _coords_to_tensor(rep, v, m), resid))
    return out


# ---------------------------------------------------------------------------
# model subalgebras used by the topology tables and tests
# ---------------------------------------------------------------------------

def so_embedded_basis(m: int, fixed_axes: int = 1) -> list[np.ndarray]:
    """so(m - fixed_axes) acting on the trailing coordinates of R^m."""
    out = []
    for i in range(fixed_axes, m):
        for j in range(i + 1, m):
            S = np.zeros((m, m))
            S[i, j] = 1.0
            S[j, i] = -1.0
            out.append(S)
    return out


def block_so_basis(p: int, q: int) -> list[np.ndarray]:
    """so(p) + so(q) in block-diagonal position inside so(p+q)."""
    m = p + q
    out = []
    for i in range(p):
        for j in range(i + 1, p):
            S = np.zeros((m, m)); S[i, j] = 1.0; S[j, i] = -1.0
            out.append(S)
    for i in range(p, m):
        for j in range(i + 1, m):
            S = np.zeros((m, m)); S[i, j] = 1.0; S[j, i] = -1.0
            out.append(S)
    return out


def unitary_embedded_basis(q: int) -> list[np.ndarray]:
    """u(q) realified inside so(2q), interleaved coordinates."""
    from .extension import unitary_algebra_basis
    return unitary_algebra_basis(q)


_G2_FANO_TERMS = ((0, 1, 2), (0, 3, 4), (0, 6, 5), (1, 3, 5), (1, 4, 6),
                  (2, 3, 6), (2, 5, 4))


def octonion_three_form() -> np.ndarray:
    """Coefficients of the standard associative 3-form over sorted triples."""
    triples = list(combinations(range(7), 3))
    pos = {t: i for i, t in enumerate(triples)}
    phi = np.zeros(len(triples))
    for t in _G2_FANO_TERMS:
        key, sign = _perm_sign_sorted(t)
        phi[pos[key]] += sign
    return phi


def g2_basis() -> list[np.ndarray]:
    """Basis of the 14-dimensional stabilizer algebra of the associative 3-form."""
    from .extension import skew_basis
    so7 = skew_basis(7)
    phi = octonion_three_form()
    rows = np.array([_lambda3_action(S) @ phi for S in so7])   # (21, 35)
    # kernel of c -> sum_b c_b rows[b] over so(7) coefficients c
    U, s, Vt = np.linalg.svd(rows.T, full_matrices=True)
    svals = np.zeros(21)
    svals[:len(s)] = s
    coeffs = Vt[svals <= 1e-10]
    gens = [sum(c * S for c, S in zip(row, so7)) for row in coeffs]
    if len(gens) != 14:
        raise RuntimeError(f"stabilizer dimension {len(gens)} != 14")
    return [g / np.linalg.norm(g) for g in gens]


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------

def transitivity_report(rhos, estimate: SubgroupEstimate, verdict: str,
                        invariants: dict[str, list[InvariantTensor]]) -> dict:
    return {
        "rhos": [np.asarray(r).tolist() for r in rhos],
        "algebra_basis": [np.asarray(b).tolist() for b in estimate.algebra_basis],
        "dimension": estimate.dimension,
        "generator_count": estimate.generator_count,
        "verdict": verdict,
        "invariant_tensors": {
            rep: [{"representation": t.representation,
                   "coefficients": np.asarray(t.coefficients).tolist(),
                   "residual": t.residual} for t in tensors]
            for rep, tensors in invariants.items()
        },
    }
