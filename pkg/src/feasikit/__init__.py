"""feasikit: overrelaxed cutter methods for consistent convex feasibility problems.

The package solves "find x in C1 n ... n Cm n Q" by extrapolated,
simultaneous cutter steps projected back onto Q, certifies the convergence
theorems' preconditions mechanically, and ships a diagnostics suite that
turns the underlying lemmas into executable checks.
"""

from . import diagnostics, geometry, operators, schedules, solver
from .errors import FeasikitError

__version__ = "0.1.0"

__all__ = [
    "geometry",
    "operators",
    "schedules",
    "solver",
    "diagnostics",
    "FeasikitError",
    "__version__",
]
