"""Exact branch-and-bound packing of unimodular lattice simplices."""

from .geometry import (Placement, SimplexShape, canonicalize, enumerate_shapelist, minkowski_difference,
                       standard_simplex, verify_packing)
from .inner import InnerInstance, InnerResult, InnerStatus, solve_inner
from .outer import BoundsDatabase, OuterConfig, RunReport, derive_submultisets, solve_outer

__all__ = [
    "Placement", "SimplexShape", "canonicalize", "enumerate_shapelist", "minkowski_difference",
    "standard_simplex", "verify_packing", "InnerInstance", "InnerResult", "InnerStatus", "solve_inner",
    "BoundsDatabase", "OuterConfig", "RunReport", "derive_submultisets", "solve_outer",
]
__version__ = "0.1.0"
