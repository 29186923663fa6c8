"""Random products over i.i.d. partial sums and their link to ``h(k)``.

For i.i.d. ``X_i >= 0`` with partial sums ``S_i`` (``S_0 = 0``),
``R_n(x, X) = prod_{i=0}^{n} (1 + E{X}/(x + S_i))`` and
``rho(x, X) = limsup E{R_n}/n``.  Products are accumulated as sums of
``log1p`` terms and exponentiated once per replicate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .distributions import Pmf, condition_nonzero, moments, sample_many
from .montecarlo import run_chunks, summarize
from .recursion import InfiniteRegime, solve_h

__all__ = [
    "DIVERGENCE_FACTOR",
    "ROUNDING_RTOL",
    "RhoEstimate",
    "CramerRate",
    "Theorem6Report",
    "simulate_R",
    "estimate_rho",
    "rho_recursion_residual",
    "cramer_rate",
    "tail_fraction",
    "theorem6_crosscheck",
]

DIVERGENCE_FACTOR = 1.5
# Rounding floor for the Theorem 6 comparison: log-sum accumulation over 2n terms.
ROUNDING_RTOL = 1e-9


@dataclass(frozen=True)
class RhoEstimate:
    """``E{R_n}/n`` at ``n`` plus the ``2n`` growth diagnostic.

    ``extrapolated`` is ``E{R_{2n} - R_n}/n``, which cancels the ``1/n`` term
    of ``E{R_n}/n``; it is exact for deterministic ``X``.
    """

    x: float
    n: int
    value: float
    stderr: float
    replicates: int
    diverging: bool
    value_2n: float
    stderr_2n: float
    growth_ratio: float
    extrapolated: float
    extrapolated_stderr: float
    seed: int
    threshold: float = DIVERGENCE_FACTOR


@dataclass(frozen=True)
class CramerRate:
    r: float
    t: float
    at_boundary: bool


def simulate_R(x: float, p: Pmf, n: int, rng: np.random.Generator) -> float:
    """``log R_n(x, X)`` along one path; draws ``X_1..X_n`` from ``rng`` by inverse CDF."""
    if x <= 0:
        raise ValueError("x must be positive")
    mean = p.mean
    cdf = p.cdf
    vals = p.values
    S = 0
    acc = math.log1p(mean / x)
    for _ in range(n):
        S += vals[int(np.searchsorted(cdf, rng.random(), side="right"))]
        acc += math.log1p(mean / (x + float(S)))
    return acc


def _log_products(x, p, marks, reps, seed, threads, backend):
    values = np.array(p.value_array, dtype=np.int64)
    cdf = np.array(p.cdf, dtype=np.float64)
    return run_chunks("log_products", seed, reps, float(x), float(p.mean), values, cdf,
                      np.array(marks, dtype=np.int64),
                      threads=threads, backend=backend)


def estimate_rho(x: float, p: Pmf, n: int, reps: int, seed: int,
                 threshold: float = DIVERGENCE_FACTOR, *, threads: int | None = None,
                 backend: str | None = None) -> RhoEstimate:
    """Monte Carlo ``E{R_n(x, X)}/n`` and divergence diagnostic.

    ``diverging`` is set when ``x <= m0`` (where ``rho`` is infinite), when
    ``E{R_{2n}}/(2n)`` exceeds ``threshold`` times ``E{R_n}/n``, or when a
    product overflows.
    """
    if x <= 0:
        raise ValueError("x must be positive")
    if n < 1:
        raise ValueError("n must be positive")
    logs = _log_products(x, p, [n, 2 * n], reps, seed, threads, backend)
    with np.errstate(over="ignore"):
        r_n = np.exp(logs[:, 0]) / n
        r_2n = np.exp(logs[:, 1]) / (2 * n)
        extra = 2.0 * r_2n - r_n
    finite = bool(np.all(np.isfinite(r_2n)))
    e_n = summarize(r_n, seed, n) if finite else None
    e_2n = summarize(r_2n, seed, 2 * n) if finite else None
    e_x = summarize(extra, seed, n) if finite else None
    m0 = moments(p).m0
    if finite:
        ratio = e_2n.value / e_n.value
        diverging = x <= m0 or ratio > threshold
        return RhoEstimate(float(x), n, e_n.value, e_n.stderr, reps, diverging, e_2n.value,
                           e_2n.stderr, ratio, e_x.value, e_x.stderr, int(seed), threshold)
    inf = math.inf
    return RhoEstimate(float(x), n, inf, inf, reps, True, inf, inf, inf, inf, inf, int(seed), threshold)


def rho_recursion_residual(x: float, p: Pmf,
                           rho: Mapping[float, float] | Callable[[float], float]) -> float:
    """``x rho(x) - (x + E{X}) sum_j p_j rho(x + j)``; zero for the true ``rho``."""
    def get(v):
        if callable(rho):
            return float(rho(v))
        if v not in rho:
            raise KeyError(f"rho table has no entry at x={v!r}")
        return float(rho[v])

    tail = math.fsum(w * get(x + v) for v, w in p.atoms)
    return x * get(x) - (x + p.mean) * tail


def cramer_rate(p: Pmf, y: float) -> CramerRate:
    """``inf_{t>0} e^{ty} E{e^{-tX}}``, a per-step bound on ``P{S_n <= n y}``.

    For ``y >= E{X}`` the bound is trivial: returns ``r = 1`` flagged
    ``at_boundary``.
    """
    if y <= 0:
        raise ValueError("y must be positive")
    if y >= p.mean:
        return CramerRate(1.0, 0.0, True)
    v = p.value_array.astype(np.float64)
    logw = np.log(p.mass_array)

    def logf(t):
        return t * y + logsumexp(logw - t * v)

    ts = np.concatenate([[0.0], np.logspace(-8, 3, 400)])
    vals = np.array([logf(t) for t in ts])
    i = int(np.argmin(vals))
    best_t, best = float(ts[i]), float(vals[i])
    if 0 < i < len(ts) - 1:
        res = minimize_scalar(logf, bracket=(ts[i - 1], ts[i], ts[i + 1]), method="golden",
                              tol=1e-8)
        if res.fun <= best:
            best_t, best = float(res.x), float(res.fun)
    return CramerRate(math.exp(best), best_t, False)


def tail_fraction(p: Pmf, n: int, y: float, paths: int, seed: int) -> float:
    """Fraction of ``paths`` simulated sums with ``S_n <= n y``."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    hits = 0
    done = 0
    block = max(1, 2_000_000 // max(n, 1))
    while done < paths:
        m = min(block, paths - done)
        sums = sample_many(p, rng, m * n).reshape(m, n).sum(axis=1)
        hits += int(np.count_nonzero(sums <= n * y))
        done += m
    return hits / paths


@dataclass(frozen=True)
class Theorem6Report:
    k: int
    h_lo: float
    h_hi: float
    unconditioned: RhoEstimate
    conditioned: RhoEstimate
    h_unconditioned: float
    h_conditioned: float
    se_unconditioned: float
    se_conditioned: float
    err_unconditioned: float
    err_conditioned: float
    tol_unconditioned: float
    tol_conditioned: float

    @property
    def passed(self) -> bool:
        return (self.err_unconditioned <= self.tol_unconditioned
                and self.err_conditioned <= self.tol_conditioned)


def theorem6_crosscheck(p: Pmf, k: int, n: int, reps: int, seed: int, *,
                        threads: int | None = None, backend: str | None = None) -> Theorem6Report:
    """Compare ``rho(k - E L, L)/E L`` and ``rho(k - m1, L')/m1`` with the solver bracket for ``h(k)``.

    Each form passes when its extrapolated estimate is within
    ``3 stderr + bracket width`` of the bracket midpoint, plus a relative
    rounding floor of ``ROUNDING_RTOL``.
    """
    ms = moments(p)
    if k <= ms.m1:
        raise InfiniteRegime(f"k <= m1 = {ms.m1:.6g}: h(k) infinite")
    table = solve_h(condition_nonzero(p), k, k, backend=backend)
    lo, hi = table.row(k)
    mid, width = 0.5 * (lo + hi), hi - lo
    un = estimate_rho(k - ms.mean, p, n, reps, seed, threads=threads, backend=backend)
    co = estimate_rho(k - ms.m1, condition_nonzero(p), n, reps, seed, threads=threads,
                      backend=backend)
    hu, su = un.extrapolated / ms.mean, un.extrapolated_stderr / ms.mean
    hc, sc = co.extrapolated / ms.m1, co.extrapolated_stderr / ms.m1
    return Theorem6Report(k, lo, hi, un, co, hu, hc, su, sc, abs(hu - mid), abs(hc - mid),
                          3 * su + width + ROUNDING_RTOL * mid,
                          3 * sc + width + ROUNDING_RTOL * mid)
