"""Continuous- and discrete-time simulation of nondecreasing branching processes.

Models are piecewise constant: each segment has a duration, a split intensity
and an offspring law ``p`` (an individual that splits is replaced by ``1 + L``
individuals).  Simulation always runs on the canonical reduction, where the
intensity is 1 and ``L >= 1``; estimates are reported against the original
clock.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .distributions import Pmf, PmfError, condition_nonzero, moments, pmf_from_json, thin
from .montecarlo import McEstimate, run_chunks, summarize

__all__ = [
    "POP_CAP",
    "DT_SWITCH",
    "ModelError",
    "Segment",
    "Model",
    "Trajectory",
    "HRead",
    "homogeneous",
    "model_from_json",
    "model_to_json",
    "reduce",
    "growth_exponent",
    "time_change",
    "simulate_ct",
    "estimate_h",
    "read_h",
    "simulate_dt",
    "estimate_H",
    "regular_tree_pgf",
    "regular_tree_oracle_h",
]

POP_CAP = 2**63 - 1
DT_SWITCH = 10_000
_EXP_SAFE = 700.0


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    duration: float
    rate: float
    offspring: Pmf


@dataclass(frozen=True)
class Model:
    k0: int
    segments: tuple[Segment, ...]
    reduced: bool = False

    def __post_init__(self):
        if int(self.k0) != self.k0 or self.k0 < 1:
            raise ModelError("k0 must be a positive integer")
        if not self.segments:
            raise ModelError("model needs at least one segment")
        for i, seg in enumerate(self.segments):
            last = i == len(self.segments) - 1
            if seg.rate < 0 or not math.isfinite(seg.rate):
                raise ModelError(f"segment {i}: rate must be finite and nonnegative")
            if last != math.isinf(seg.duration) or not seg.duration > 0:
                raise ModelError("durations must be positive, finite except the last, which is inf")
            if self.reduced and (seg.rate != 1.0 or seg.offspring.p0 > 0):
                raise ModelError("a reduced model has unit rates and zero-free offspring")

    def satisfies_star(self) -> bool:
        """Whether the cumulative effective intensity is unbounded."""
        last = self.segments[-1]
        return last.rate * (1.0 - last.offspring.p0) > 0


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    populations: list[int] = field(default_factory=list)
    censored: bool = False

    def at(self, t: float) -> int:
        """Population at time ``t`` (right-continuous)."""
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.populations[idx]


def homogeneous(p: Pmf, k0: int, rate: float = 1.0) -> Model:
    return Model(int(k0), (Segment(math.inf, float(rate), p),))


def model_from_json(obj) -> Model:
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    try:
        segs = []
        for s in obj["segments"]:
            d = s["duration"]
            d = math.inf if d in ("inf", "infinity", "Infinity") else float(d)
            segs.append(Segment(d, float(s["rate"]), pmf_from_json(s["pmf"])))
        return Model(int(obj["k0"]), tuple(segs))
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model file: {exc}") from exc


def model_to_json(m: Model) -> dict:
    return {
        "k0": m.k0,
        "segments": [
            {"duration": "inf" if math.isinf(s.duration) else s.duration, "rate": s.rate,
             "pmf": [[v, w] for v, w in s.offspring.atoms]}
            for s in m.segments
        ],
    }


def reduce(m: Model) -> Model:
    """Canonical reduction: unit intensity, offspring conditioned on ``L != 0``.

    Segment ``j`` lasts ``d_j s_j (1 - p_j(0))`` units of the new clock;
    segments of zero effective intensity are dropped.
    """
    if m.reduced:
        return m
    if not m.satisfies_star():
        raise ModelError("condition (*) violated: effective intensity of the last segment is 0")
    segs = []
    for s in m.segments:
        eff = s.rate * (1.0 - s.offspring.p0)
        if eff == 0:
            continue
        segs.append(Segment(s.duration * eff, 1.0, condition_nonzero(s.offspring)))
    return Model(m.k0, tuple(segs), reduced=True)


def _piecewise(m: Model, t, per_unit):
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(t < 0):
        raise ValueError("times must be nonnegative")
    out = np.zeros_like(t)
    start = 0.0
    for s in m.segments:
        overlap = np.clip(t - start, 0.0, s.duration)
        out += per_unit(s) * overlap
        start += s.duration
    return out


def growth_exponent(m: Model, t):
    """``M(t) = int_0^t E{L(u)} s(u) du``."""
    return _piecewise(m, t, lambda s: s.offspring.mean * s.rate)


def time_change(m: Model, t):
    """``sigma(t) = int_0^t (1 - p(0, u)) s(u) du``."""
    return _piecewise(m, t, lambda s: (1.0 - s.offspring.p0) * s.rate)


def _segment_arrays(r: Model):
    width = max(len(s.offspring) for s in r.segments)
    S = len(r.segments)
    ends = np.empty(S)
    cdf = np.ones((S, width))
    vals = np.zeros((S, width), dtype=np.int64)
    nat = np.zeros(S, dtype=np.int64)
    acc = 0.0
    for i, s in enumerate(r.segments):
        acc += s.duration
        ends[i] = acc
        n = len(s.offspring)
        cdf[i, :n] = s.offspring.cdf
        vals[i, :n] = s.offspring.value_array
        vals[i, n:] = s.offspring.values[-1]
        nat[i] = n
    ends[-1] = math.inf
    return ends, cdf, vals, nat


def simulate_ct(m: Model, t_end: float, rng: np.random.Generator, cap: int = POP_CAP) -> Trajectory:
    """Exact event-driven path of a reduced model on ``[0, t_end]``.

    With population ``z`` the next split comes after an Exponential(rate ``z``)
    wait; a wait that crosses a segment boundary is discarded and redrawn
    from the boundary.  Draw order matches the compiled kernels.
    """
    if not m.reduced:
        raise ModelError("simulate_ct needs a reduced model; call reduce() first")
    ends, cdf, vals, nat = _segment_arrays(m)
    traj = Trajectory([0.0], [m.k0])
    z, t, seg = m.k0, 0.0, 0
    while True:
        tn = t + rng.standard_exponential() / float(z)
        if tn >= ends[seg]:
            if ends[seg] > t_end:
                break
            t = float(ends[seg])
            seg += 1
            continue
        if tn > t_end:
            break
        u = rng.random()
        j = 0
        while j < nat[seg] - 1 and not (u < cdf[seg, j]):
            j += 1
        inc = int(vals[seg, j])
        if z > cap - inc:
            traj.censored = True
            break
        z += inc
        t = tn
        traj.times.append(t)
        traj.populations.append(z)
    return traj


def _normalized_inverse(M: np.ndarray, pops: np.ndarray, b: float) -> np.ndarray:
    small = M < _EXP_SAFE
    denom = pops.astype(np.float64) - b
    return np.where(small, np.exp(np.minimum(M, _EXP_SAFE)) / denom, np.exp(M - np.log(denom)))


def estimate_h(m: Model, t_grid, reps: int, seed: int, b: float = 0.0, *,
               threads: int | None = None, backend: str | None = None) -> list[McEstimate]:
    """Monte Carlo estimates of ``h_k(t, b) = e^{M(t)} E_k{1/(z_t - b)}`` along ``t_grid``.

    All grid points are read off the same trajectories.
    """
    if b >= m.k0:
        raise ModelError("shift b must be smaller than k0")
    t = np.asarray(t_grid, dtype=np.float64)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("t_grid must be a nonempty list of times")
    r = reduce(m)
    order = np.argsort(t, kind="stable")
    sig = time_change(m, t[order]) if not m.reduced else t[order]
    ends, cdf, vals, nat = _segment_arrays(r)
    pops, cens = run_chunks("ct_populations", seed, reps, np.int64(r.k0), ends, cdf, vals, nat,
                            np.ascontiguousarray(sig), np.int64(POP_CAP),
                            threads=threads, backend=backend)
    M = growth_exponent(m, t[order])
    n_cens = int(cens.sum())
    out: list[McEstimate | None] = [None] * t.size
    for col, idx in enumerate(order):
        vals_t = _normalized_inverse(np.full(reps, M[col]), pops[:, col], b)
        out[idx] = summarize(vals_t, seed, t[idx], n_cens)
    return out  # type: ignore[return-value]


@dataclass(frozen=True)
class HRead:
    """Result of the doubling-grid read of ``h(k)``."""

    estimate: McEstimate
    t: float
    gap: float
    converged: bool
    history: tuple[McEstimate, ...]


def _expected_events(m: Model, t: float) -> float:
    r = reduce(m)
    inc = min(s.offspring.mean for s in r.segments)
    return m.k0 * math.expm1(float(growth_exponent(m, t)[0])) / inc


def read_h(m: Model, reps: int, seed: int, b: float = 0.0, t0: float = 0.5,
           abs_tol: float = 1e-3, event_budget: float = 2e9, max_doublings: int = 12,
           *, threads: int | None = None, backend: str | None = None) -> HRead:
    """Read ``h(k)`` as the long-time plateau of ``h_k(t)``.

    Evaluates ``t0 * 2**j`` for growing ``j`` until two successive estimates
    differ by less than ``max(stderr, abs_tol)``.  Doubling stops early,
    unconverged, once the expected number of simulated splits
    (``reps * k0 * (e^{M(t)} - 1) / mean increment``) would exceed
    ``event_budget``.  The reported gap is the last successive difference; it
    is not a bound on ``h(k) - h_k(t)``.
    """
    grid = [t0]
    while len(grid) <= max_doublings and reps * _expected_events(m, 2 * grid[-1]) <= event_budget:
        grid.append(2 * grid[-1])
    ests = estimate_h(m, grid, reps, seed, b, threads=threads, backend=backend)
    for j in range(1, len(ests)):
        gap = abs(ests[j].value - ests[j - 1].value)
        if gap < max(ests[j].stderr, abs_tol):
            return HRead(ests[j], grid[j], gap, True, tuple(ests[: j + 1]))
    gap = abs(ests[-1].value - ests[-2].value) if len(ests) > 1 else math.inf
    return HRead(ests[-1], grid[-1], gap, False, tuple(ests))


def _dt_law(p: Pmf, u: float | None) -> Pmf:
    return p if u is None else thin(p, u)


def simulate_dt(p: Pmf, k0: int, n: int, u: float | None, rng: np.random.Generator,
                switch: int = DT_SWITCH, cap: int = POP_CAP) -> np.ndarray:
    """Galton-Watson path ``Z(0..n)`` with reproduction ``1 + L_u``.

    Generations with ``Z <= switch`` draw each individual; larger ones draw
    the atom counts from one multinomial.  Raises :class:`OverflowError` past
    ``cap``.
    """
    law = _dt_law(p, u)
    vals = law.values
    cdf = law.cdf
    probs = law.mass_array
    path = np.empty(n + 1, dtype=np.int64)
    Z = int(k0)
    path[0] = Z
    for g in range(1, n + 1):
        if Z <= switch:
            inc = sum(vals[int(np.searchsorted(cdf, rng.random(), side="right"))] for _ in range(Z))
        else:
            counts = rng.multinomial(Z, probs)
            inc = sum(int(c) * v for c, v in zip(counts, vals))
        if inc > cap - Z:
            raise OverflowError(f"population exceeds {cap} at generation {g}")
        Z += inc
        path[g] = Z
    return path


def estimate_H(p: Pmf, k0: int, n, u: float | None, reps: int, seed: int, *,
               switch: int = DT_SWITCH, threads: int | None = None,
               backend: str | None = None):
    """Estimates of ``H_n^u(k) = (1 + u E{L})^n E_k{1/Z_u(n)}``; ``u=None`` means no thinning.

    ``n`` may be an int (one estimate) or a sequence (list of estimates from
    shared paths).  Overflowed replicates are counted in ``censored``.
    """
    scalar = np.ndim(n) == 0
    ns = np.atleast_1d(np.asarray(n, dtype=np.int64))
    if np.any(ns < 0):
        raise ValueError("generations must be nonnegative")
    law = _dt_law(p, u)
    order = np.argsort(ns, kind="stable")
    sorted_n = np.ascontiguousarray(ns[order])
    pops, ovf = run_chunks("dt_populations", seed, reps, np.int64(k0), sorted_n, law.value_array,
                           np.ascontiguousarray(law.cdf), law.mass_array, np.int64(switch),
                           np.int64(POP_CAP), threads=threads, backend=backend)
    growth = math.log1p((1.0 if u is None else u) * p.mean)
    out: list[McEstimate | None] = [None] * ns.size
    for col, idx in enumerate(order):
        logn = float(sorted_n[col]) * growth
        vals = _normalized_inverse(np.full(reps, logn), pops[:, col], 0.0)
        out[idx] = summarize(vals, seed, float(ns[idx]), int(ovf.sum()))
    return out[0] if scalar else out


def _one_minus_pow(v: float, i: int) -> float:
    """``1 - v**i`` without cancellation near ``v = 1``."""
    if v == 0:
        return 1.0
    return -math.expm1(i * math.log(v))


def regular_tree_pgf(i: int, lam: float, t: float, v: float) -> float:
    """Generating function of ``z_t`` from one ancestor when every split adds ``i``.

    ``lam`` is the per-individual split intensity, so ``E_1{z_t} = e^{i lam t}``.
    The denominator ``e^x - (e^x - 1) v^i`` is evaluated as
    ``1 + (e^x - 1)(1 - v^i)``.
    """
    if i < 1 or lam <= 0 or t < 0 or not 0 <= v <= 1:
        raise ValueError("need i >= 1, lam > 0, t >= 0, 0 <= v <= 1")
    em1 = math.expm1(i * lam * t)
    return v / (1.0 + em1 * _one_minus_pow(v, i)) ** (1.0 / i)


def _regular_tree_closed(i: int, lam: float, t: float) -> float:
    x = i * lam * t
    if x == 0:
        return 1.0 / i
    return x / (i * -math.expm1(-x))


def regular_tree_oracle_h(i: int, lam: float, k0: int, t: float, *, quadrature: bool | None = None) -> float:
    """``h_{k0}(t)`` for offspring ``delta_i`` at split intensity ``lam``.

    Uses ``E_{k}{1/z_t} = int_0^1 E_1{v^{z_t}}^k dv / v``.  For ``k0 == i`` the
    integral has the closed form ``x e^x / (i (e^x - 1))``, ``x = i lam t``,
    which is returned unless ``quadrature=True``.  The quadrature runs in
    ``w = 1 - v``, where the integrand is
    ``(1 - w)^(k0-1) (1 + (e^x - 1)(1 - (1 - w)^i))^(-k0/i)``.
    """
    if quadrature is None:
        quadrature = k0 != i
    if not quadrature:
        return _regular_tree_closed(i, lam, t)
    if t == 0:
        return 1.0 / k0
    x = i * lam * t
    em1 = math.expm1(x)

    def f(w):
        if w >= 1.0:
            return 0.0 if k0 > 1 else (1.0 + em1) ** (-1.0 / i)
        q = -math.expm1(i * math.log1p(-w))  # 1 - (1 - w)^i
        return (1.0 - w) ** (k0 - 1) * (1.0 + em1 * q) ** (-k0 / i)

    # The integrand decays algebraically beyond w ~ 1/(e^x - 1); cut geometrically.
    scale = 1.0 / em1
    cuts = [0.0]
    c = scale
    while c < 1.0:
        cuts.append(c)
        c *= 10.0
    cuts.append(1.0)
    total, err = 0.0, 0.0
    for a, b in zip(cuts, cuts[1:]):
        val, e = integrate.quad(f, a, b, epsabs=1e-14 * scale, epsrel=1e-12, limit=400)
        total += val
        err += e
    rel = err * (1.0 + em1) / max(total * (1.0 + em1), 1e-300)
    if rel > 1e-10:
        raise RuntimeError(f"quadrature did not converge (relative error estimate {rel:.2e})")
    return (1.0 + em1) * total
