"""Replicate partitioning and estimate bookkeeping shared by the simulators.

Replicate ``r`` of a run seeded with ``seed`` draws from
``PCG64(SeedSequence(seed, spawn_key=(r,)))``, i.e. the ``r``-th child of
``SeedSequence(seed).spawn``.  Replicates are split into contiguous chunks,
one per worker; each chunk fills its own rows, and reductions run over the
assembled array in replicate order, so results do not depend on the worker
count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _backend

__all__ = ["McEstimate", "default_threads", "run_chunks", "summarize", "replicate_stream"]


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    replicates: int
    seed: int
    t_or_n: float
    censored: int = 0

    def within(self, target: float, k: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.value - target) <= k * self.stderr + slack


def replicate_stream(seed: int, r: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(r,))))


def default_threads() -> int:
    env = os.environ.get("HARMONIA_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("HARMONIA_THREADS must be a positive integer")
        return n
    return 1


def _bounds(reps: int, threads: int) -> list[tuple[int, int]]:
    threads = max(1, min(threads, reps))
    step, extra = divmod(reps, threads)
    out, start = [], 0
    for w in range(threads):
        stop = start + step + (1 if w < extra else 0)
        out.append((start, stop))
        start = stop
    return out


def run_chunks(kernel_name: str, seed: int, reps: int, *args, threads: int | None = None,
               backend: str | None = None):
    """Run ``kernel(seed, start, stop, *args)`` over all replicates and stack the outputs."""
    if reps < 1:
        raise ValueError("reps must be positive")
    if seed is None:
        raise ValueError("a seed is required")
    mod = _backend.get(backend)
    fn = getattr(mod, kernel_name)
    threads = default_threads() if threads is None else threads
    chunks = _bounds(reps, threads)
    if len(chunks) == 1:
        parts = [fn(seed, 0, reps, *args)]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as ex:
            parts = list(ex.map(lambda b: fn(seed, b[0], b[1], *args), chunks))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
    return np.concatenate(parts)


def summarize(samples: np.ndarray, seed: int, t_or_n: float, censored: int = 0) -> McEstimate:
    """Sample mean and ``sd / sqrt(R)`` (``ddof=1``) of per-replicate values."""
    x = np.asarray(samples, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError("need at least two replicates")
    if np.all(x == x[0]):
        return McEstimate(float(x[0]), 0.0, n, int(seed), float(t_or_n), int(censored))
    mean = math.fsum(x) / n
    sd = math.sqrt(math.fsum((x - mean) ** 2) / (n - 1))
    return McEstimate(mean, sd / math.sqrt(n), n, int(seed), float(t_or_n), int(censored))
