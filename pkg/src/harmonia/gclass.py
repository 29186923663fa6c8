"""The comparison class G_c and the curvature parameter of a law.

A law ``L`` with mean ``m`` lies in ``G_c`` when its generating function is
dominated on ``[0, 1]`` by ``g_{c,m}(s) = (1 + m(1 - s^c))^(-1/c)``, the
generating function of a scaled negative binomial with the same mean.  The
curvature of ``L`` is the least such ``c``.  Margins vanish to second order at
``s = 1``, so every difference below is assembled from ``1 - E{s^L}`` and
``1 - g`` computed with ``expm1``/``log1p`` rather than by subtracting numbers
close to one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .distributions import Pmf, moments, one_minus_pgf, thin

__all__ = [
    "MEMBERSHIP_TOL",
    "MembershipReport",
    "CurvatureBracket",
    "s_grid",
    "g_eval",
    "phi",
    "omega",
    "margin",
    "min_over_grid",
    "membership",
    "curvature",
    "curvature_limit",
    "comparison_variance",
]

MEMBERSHIP_TOL = 1e-12
DEFAULT_GRID = 4096
MAX_BISECTIONS = 60


@dataclass(frozen=True)
class MembershipReport:
    c: float
    in_class: bool
    min_margin: float
    argmin_s: float
    grid_size: int


@dataclass(frozen=True)
class CurvatureBracket:
    lo: float
    hi: float
    tol: float
    iterations: int = 0
    converged: bool = True

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


def s_grid(n: int = DEFAULT_GRID) -> np.ndarray:
    """Uniform points on [0, 1] plus ``1 - 2**-j`` for ``j = 1..40``."""
    if n < 64:
        raise ValueError("grid must have at least 64 points")
    geo = 1.0 - np.exp2(-np.arange(1, 41, dtype=np.float64))
    return np.unique(np.concatenate([np.linspace(0.0, 1.0, n), geo]))


def _one_minus_g(c: float, m: float, s):
    s = np.asarray(s, dtype=np.float64)
    with np.errstate(divide="ignore"):
        logs = np.log(s)
    if c == 0:
        return -np.expm1(m * logs)
    w = -np.expm1(c * logs)  # 1 - s^c
    return -np.expm1(-np.log1p(m * w) / c)


def g_eval(c: float, m: float, s):
    if c < 0 or m < 0:
        raise ValueError("c and m must be nonnegative")
    out = 1.0 - _one_minus_g(c, m, s)
    return float(out) if np.ndim(s) == 0 else out


def margin(p: Pmf, c: float, s):
    """``g_{c,m}(s) - E{s^L}`` with ``m = E{L}``."""
    out = one_minus_pgf(p, s) - _one_minus_g(c, p.mean, s)
    return float(out) if np.ndim(s) == 0 else out


def phi(p: Pmf, c: float, s):
    """``c(1 - E{s^L}) - E{L}(1 - s^c)``; nonnegative on [0, 1] iff ``c >= m2``."""
    if c <= 0:
        raise ValueError("c must be positive")
    s = np.asarray(s, dtype=np.float64)
    with np.errstate(divide="ignore"):
        one_minus_sc = -np.expm1(c * np.log(s))
    out = c * one_minus_pgf(p, s) - p.mean * one_minus_sc
    return float(out) if np.ndim(out) == 0 else out


def omega(p: Pmf, s, u: float, c: float):
    """Log-form of the ``G_c`` test for the thinned law; ``<= 0`` everywhere iff ``L_u`` is in ``G_c``."""
    if not 0 < u <= 1 or c <= 0:
        raise ValueError("need 0 < u <= 1 and c > 0")
    s = np.asarray(s, dtype=np.float64)
    with np.errstate(divide="ignore"):
        one_minus_sc = -np.expm1(c * np.log(s))
    out = np.log1p(u * p.mean * one_minus_sc) + c * np.log1p(-u * one_minus_pgf(p, s))
    return float(out) if np.ndim(out) == 0 else out


def min_over_grid(f, grid: np.ndarray, refine: bool = True) -> tuple[float, float]:
    """Minimum of a vectorized ``f`` over ``grid``, polished by a bounded 1-d search."""
    vals = np.asarray(f(grid), dtype=np.float64)
    i = int(np.argmin(vals))
    best, arg = float(vals[i]), float(grid[i])
    if refine:
        a = grid[max(i - 1, 0)]
        b = grid[min(i + 1, len(grid) - 1)]
        if b > a:
            res = minimize_scalar(lambda x: float(f(np.array([x]))[0]), bounds=(a, b),
                                  method="bounded", options={"xatol": 1e-15})
            if res.fun < best:
                best, arg = float(res.fun), float(res.x)
    return best, arg


def membership(p: Pmf, c: float, grid: int = DEFAULT_GRID) -> MembershipReport:
    pts = s_grid(grid)
    best, arg = min_over_grid(lambda s: margin(p, c, s), pts)
    return MembershipReport(float(c), best >= -MEMBERSHIP_TOL, best, arg, len(pts))


def curvature(p: Pmf, tol: float = 1e-6, grid: int = DEFAULT_GRID,
              max_iter: int = MAX_BISECTIONS) -> CurvatureBracket:
    """Bisection bracket for the least ``c`` with ``L`` in ``G_c``.

    Starts from ``[(m2 - E L)/(1 + E L), m2]``; the class is increasing in
    ``c`` so membership is a monotone predicate.  Stops at width ``tol`` or
    after ``max_iter`` halvings; ``converged`` is False (with a warning) when
    the width was not reached.
    """
    ms = moments(p)
    lo = (ms.m2 - ms.mean) / (1.0 + ms.mean)
    hi = ms.m2
    if membership(p, lo, grid).in_class:
        return CurvatureBracket(lo, lo, tol, 0, True)
    if not membership(p, hi, grid).in_class:
        raise RuntimeError(f"law not in G_c at c = m2 = {hi!r}; grid too coarse")
    it = 0
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if membership(p, mid, grid).in_class:
            hi = mid
        else:
            lo = mid
        it += 1
    ok = hi - lo <= tol
    if not ok:
        warnings.warn(f"curvature bracket width {hi - lo:.3g} did not reach tol {tol:.3g}",
                      RuntimeWarning, stacklevel=2)
    return CurvatureBracket(lo, hi, tol, it, ok)


def curvature_limit(p: Pmf, u_grid, tol: float = 1e-6,
                    grid: int = DEFAULT_GRID) -> dict[float, CurvatureBracket]:
    """Curvature of the thinned laws ``L_u`` along a decreasing ``u_grid``.

    The curvature of ``L_u`` is nonincreasing in ``u`` and tends to ``m2`` as
    ``u -> 0``; a :class:`RuntimeWarning` is issued if consecutive brackets
    contradict the monotonicity by more than ``tol``.
    """
    us = [float(u) for u in u_grid]
    if any(b >= a for a, b in zip(us, us[1:])):
        raise ValueError("u_grid must be strictly decreasing")
    out: dict[float, CurvatureBracket] = {}
    prev = None
    for u in us:
        br = curvature(thin(p, u), tol, grid)
        if prev is not None and br.hi < prev.lo - tol:
            warnings.warn(f"curvature decreased from u={u!r}", RuntimeWarning, stacklevel=2)
        out[u] = br
        prev = br
    return out


def comparison_variance(c: float, m: float, h: float = 1e-5) -> float:
    """Variance of the comparison law read off ``g_{c,m}`` by finite differences at ``s = 1``.

    Differentiates ``K(x) = log g_{c,m}(e^x)`` twice at ``x = 0`` with a
    backward stencil, which keeps ``s = e^x`` inside [0, 1].
    """
    if c < 0 or m < 0:
        raise ValueError("c and m must be nonnegative")

    def cum(x):
        if c == 0:
            return m * x
        return -math.log1p(-m * math.expm1(c * x)) / c

    k0, k1, k2, k3 = cum(0.0), cum(-h), cum(-2 * h), cum(-3 * h)
    return (2 * k0 - 5 * k1 + 4 * k2 - k3) / (h * h)
