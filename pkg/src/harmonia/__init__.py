"""Harmonic moments of nondecreasing branching processes.

Thresholds and curvature of offspring laws, certified brackets for the
limiting harmonic moment ``h(k)``, Monte Carlo simulators in continuous and
discrete time, and random products of i.i.d. sums.
"""

from . import distributions, gclass, products, recursion, simulate
from ._backend import get as backend
from .distributions import Pmf, PmfError, condition_nonzero, moments, pgf, thin, validate
from .gclass import curvature, curvature_limit, membership
from .montecarlo import McEstimate
from .products import cramer_rate, estimate_rho, theorem6_crosscheck
from .recursion import InfiniteRegime, prop71_bound, solve_h
from .simulate import Model, estimate_H, estimate_h, read_h, reduce

__version__ = "0.1.0"

__all__ = [
    "distributions",
    "gclass",
    "products",
    "recursion",
    "simulate",
    "backend",
    "Pmf",
    "PmfError",
    "validate",
    "moments",
    "condition_nonzero",
    "thin",
    "pgf",
    "membership",
    "curvature",
    "curvature_limit",
    "McEstimate",
    "estimate_rho",
    "cramer_rate",
    "theorem6_crosscheck",
    "InfiniteRegime",
    "solve_h",
    "prop71_bound",
    "Model",
    "reduce",
    "estimate_h",
    "read_h",
    "estimate_H",
]
