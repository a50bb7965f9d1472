"""anarchy: exact-arithmetic mechanisms built from relax-and-round algorithms.

The package turns approximation algorithms (packing LPs, cycle covers,
single-source flows, combinatorial auction relaxations) into pay-your-bid
mechanisms, verifies their smoothness properties on concrete instances with
rational arithmetic, and measures equilibrium quality empirically through
no-regret dynamics.
"""

from .errors import (
    InfeasibleMatchingError,
    PreconditionError,
    SizeGuardError,
    StructuralError,
)
from .rationals import frac, frac_str, parse_frac

__all__ = [
    "StructuralError",
    "PreconditionError",
    "SizeGuardError",
    "InfeasibleMatchingError",
    "frac",
    "frac_str",
    "parse_frac",
]

__version__ = "0.1.0"
