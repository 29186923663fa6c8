"""Certified brackets for the limiting harmonic moments ``h(k)``.

``h`` solves ``(k - E{L}) h(k) = k E{h(k + L)}`` for ``k > m1``.  The map from
tail values to ``h(k)`` is linear with positive weights, so running it
downward from a tail seeded with the bounds ``1/(k - m1) < h(k) <= 1/(k - m2)``
(valid for ``k > m2``) yields valid lower and upper brackets at every ``k``.
Each sweep reseeds a tail four times further out; its brackets are
intersected with those of earlier sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .distributions import Pmf, condition_nonzero, moments

__all__ = [
    "InfiniteRegime",
    "HBracketTable",
    "solve_h",
    "default_tail",
    "prop71_bound",
    "lower_bound_iter",
    "convexity_check",
    "recursion_residuals",
]

CONVEX_TOL = 1e-9
TAIL_GROWTH = 4


class InfiniteRegime(ValueError):
    """``h(k)`` is infinite for ``k <= m1``."""


@dataclass
class HBracketTable:
    k_min: int
    k_max: int
    lo: np.ndarray
    hi: np.ndarray
    pmf_digest: str
    m1: float
    m2: float
    k_tail: int
    sweeps: int
    sweep_widths: list[float] = field(default_factory=list)

    @property
    def ks(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_max + 1)

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def row(self, k: int) -> tuple[float, float]:
        if not self.k_min <= k <= self.k_max:
            raise KeyError(k)
        i = k - self.k_min
        return float(self.lo[i]), float(self.hi[i])

    @property
    def rows(self) -> dict[int, tuple[float, float]]:
        return {int(k): self.row(int(k)) for k in self.ks}


def default_tail(k_max: int, p: Pmf) -> int:
    ms = moments(p)
    return int(k_max + 50 * math.ceil(ms.m2) + p.max_value)


def _first_finite(m1: float) -> int:
    return math.floor(m1) + 1


def solve_h(p: Pmf, k_min: int | None, k_max: int, k_tail: int | None = None,
            sweeps: int = 3, *, backend: str | None = None) -> HBracketTable:
    """Bracket ``h(k)`` for ``k_min <= k <= k_max``.

    ``p`` may carry mass at 0; the recursion is then solved in the equivalent
    unconditioned form with the ``h(k)`` term moved to the left.  ``k_min``
    defaults to ``floor(m1) + 1``.  Raises :class:`InfiniteRegime` if
    ``k_min <= m1``.
    """
    ms = moments(p)
    m1, m2 = ms.m1, ms.m2
    if k_min is None:
        k_min = _first_finite(m1)
    if k_min <= m1:
        raise InfiniteRegime(f"k <= m1 = {m1:.6g}: h(k) infinite")
    if k_max < k_min:
        raise ValueError("k_max must be at least k_min")
    if sweeps < 1:
        raise ValueError("need at least one sweep")
    vmax = p.max_value
    if k_tail is None:
        k_tail = default_tail(k_max, p)
    if k_tail <= m2 or k_tail <= k_max:
        raise ValueError(f"k_tail={k_tail} must exceed both m2={m2:.6g} and k_max={k_max}")
    nz = [(v, w) for v, w in p.atoms if v > 0]
    steps = np.array([v for v, _ in nz], dtype=np.int64)
    weights = np.array([w for _, w in nz], dtype=np.float64)
    kern = _backend.get(backend)
    best_lo = best_hi = None
    widths = []
    K = k_tail
    for _ in range(sweeps):
        n = K + vmax + 1
        kk = np.arange(n, dtype=np.float64)
        lo = np.zeros(n)
        hi = np.zeros(n)
        with np.errstate(divide="ignore"):
            lo[K:] = 1.0 / (kk[K:] - m1)
            hi[K:] = 1.0 / (kk[K:] - m2)
        kern.downward(lo, hi, k_min, K, steps, weights, p.p0, ms.mean, m1, m2)
        lo_r, hi_r = lo[k_min : k_max + 1], hi[k_min : k_max + 1]
        if best_lo is None:
            best_lo, best_hi = lo_r.copy(), hi_r.copy()
        else:
            best_lo = np.maximum(best_lo, lo_r)
            best_hi = np.maximum(np.minimum(best_hi, hi_r), best_lo)
        widths.append(float(np.max(best_hi - best_lo)))
        K *= TAIL_GROWTH
    return HBracketTable(k_min, k_max, best_lo, best_hi, p.digest(), m1, m2, k_tail, sweeps, widths)


def prop71_bound(p: Pmf, k: int, ell: int | None = None) -> tuple[float, int, int]:
    """Upper bound on ``h(k)`` for ``m1 < k``, from ``ell`` steps of ``(k - m1) h(k) <= k h(k+1)``.

    Returns ``(bound, ell_used, ell_optimal)``; ``ell=None`` uses the optimum,
    the least ``ell`` with ``k + ell > m1 (m2 - 1)/(m1 - 1)`` (or ``> m2`` when
    ``m1 == 1``).
    """
    ms = moments(p)
    m1, m2 = ms.m1, ms.m2
    if k <= m1:
        raise InfiniteRegime(f"k <= m1 = {m1:.6g}: h(k) infinite")
    threshold = m2 if math.isclose(m1, 1.0, rel_tol=0, abs_tol=1e-12) else m1 * (m2 - 1) / (m1 - 1)
    # k + ell = threshold is a tie between ell and ell + 1; round it up.
    ell_opt = max(0, math.floor(threshold - k + 1e-9) + 1)
    if ell is None:
        ell = ell_opt
    if ell < 0 or k + ell <= m2:
        raise ValueError(f"need k + ell > m2 = {m2:.6g}")
    prod = math.prod(1.0 + m1 / (k + i - m1) for i in range(ell))
    return prod / (k + ell - m2), ell, ell_opt


def lower_bound_iter(m: float, y: float, n: int) -> float:
    """``n``-th iterate of ``R -> R(y + m) y / (y - m)`` from ``R(y) = 1/y``."""
    if y <= m:
        raise ValueError("need y > m")
    if n < 0:
        raise ValueError("n must be nonnegative")
    return (1.0 / (y + n * m) + n / (y - m)) / (n + 1)


def convexity_check(t: HBracketTable, tol: float = CONVEX_TOL) -> tuple[bool, float]:
    """Whether both bracket rows have second differences ``>= -tol``; also the worst one."""
    if len(t.lo) < 3:
        raise ValueError("need at least three rows")
    worst = min(float(np.min(np.diff(t.lo, 2))), float(np.min(np.diff(t.hi, 2))))
    return worst >= -tol, worst


def recursion_residuals(p: Pmf, t: HBracketTable) -> tuple[np.ndarray, np.ndarray]:
    """``|h(k) - k E{h(k+L')}/(k - m1)|`` on bracket midpoints, for rows whose tail is in the table.

    Returns ``(ks, residuals)``.
    """
    c = condition_nonzero(p)
    mid = t.mid
    out_k, out_r = [], []
    for k in range(t.k_min, t.k_max - c.max_value + 1):
        tail = math.fsum(w * mid[k + v - t.k_min] for v, w in c.atoms)
        out_k.append(k)
        out_r.append(abs(mid[k - t.k_min] - k * tail / (k - t.m1)))
    return np.array(out_k, dtype=np.int64), np.array(out_r)
