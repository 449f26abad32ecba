"""Numerical laboratory for isometric group extensions of hyperbolic dynamics.

Provides small, exactly-solvable hyperbolic base systems (toral automorphisms,
the geodesic flow on the Poincare disk with a genus-2 fundamental domain),
rotation-group extensions driven by cocycles, holonomy-based estimation of the
transitivity group with invariant-tensor detection, vertical spherical-harmonic
analysis on sphere fibers, and the coefficient arithmetic behind pinching
thresholds for flow-invariant sections.
"""

__version__ = "0.1.0"

from . import base_dynamics
from . import extension
from . import transitivity
from . import spherical_harmonics
from . import pestov_threshold
from . import topology_tables
