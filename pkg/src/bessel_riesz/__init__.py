"""Numerical harmonic analysis on the weighted half-space (R_+^d, x^{2a} dx).

Hankel transforms, heat/Poisson/conjugate-Poisson semigroups, Riesz
transforms in multiplier and principal-value form, the Nazarov-Treil
Bellman function with positive-semidefiniteness certification, and the
bilinear-embedding verification harness that ties them together.
"""

from .grids import MultiIndexAlpha, WeightedGrid, GridFunction, LebesgueExponent
from .hankel import HankelPlan
from .riesz import RieszOperator, riesz_apply, riesz_pv_apply, d_p_constant

__all__ = [
    "MultiIndexAlpha",
    "WeightedGrid",
    "GridFunction",
    "LebesgueExponent",
    "HankelPlan",
    "RieszOperator",
    "riesz_apply",
    "riesz_pv_apply",
    "d_p_constant",
]

__version__ = "0.1.0"
