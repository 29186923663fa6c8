"""Finite-support laws on the nonnegative integers and their scalar functionals.

A :class:`Pmf` is the offspring law ``p`` of a branching mechanism (each split
replaces one individual by ``1 + L`` individuals) or the step law ``X`` of a
random product.  Everything here is a pure function of immutable values.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "MAX_VALUE",
    "MASS_TOL",
    "Pmf",
    "PmfError",
    "MomentSummary",
    "validate",
    "moments",
    "condition_nonzero",
    "thin",
    "pgf",
    "one_minus_pgf",
    "sample",
    "sample_many",
    "pmf_from_json",
    "pmf_to_json",
]

MAX_VALUE = 2**32 - 1
MASS_TOL = 1e-12


class PmfError(ValueError):
    """Raised for atoms that do not describe a valid law."""


@dataclass(frozen=True)
class Pmf:
    """Validated law: strictly increasing values, positive masses summing to one.

    Build instances with :func:`validate`; the constructor does no checking.
    """

    values: tuple[int, ...]
    masses: tuple[float, ...]
    _cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cdf = np.cumsum(np.asarray(self.masses, dtype=np.float64))
        cdf[-1] = 1.0
        cdf.setflags(write=False)
        object.__setattr__(self, "_cdf", cdf)

    @property
    def atoms(self) -> list[tuple[int, float]]:
        return list(zip(self.values, self.masses))

    @property
    def value_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)

    @property
    def mass_array(self) -> np.ndarray:
        return np.asarray(self.masses, dtype=np.float64)

    @property
    def cdf(self) -> np.ndarray:
        """Cumulative masses with the last entry pinned to exactly 1."""
        return self._cdf

    @property
    def p0(self) -> float:
        return self.masses[0] if self.values[0] == 0 else 0.0

    @property
    def max_value(self) -> int:
        return self.values[-1]

    @property
    def mean(self) -> float:
        return math.fsum(v * m for v, m in zip(self.values, self.masses))

    def digest(self) -> str:
        """Content hash of the atoms, stable across runs."""
        payload = json.dumps([[v, float.hex(m)] for v, m in self.atoms]).encode()
        return hashlib.sha256(payload).hexdigest()[:16]

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    second_moment: float
    variance: float
    m1: float
    m2: float
    m0: float
    alpha: float | None


def validate(atoms: Iterable[Sequence[float]]) -> Pmf:
    """Turn raw ``(value, mass)`` pairs into a :class:`Pmf`.

    Duplicate values are merged, zero masses dropped and the masses are
    renormalized once.  Raises :class:`PmfError` on negative or non-integer
    values, negative masses, a total mass off by more than ``MASS_TOL`` or a
    law concentrated at 0.
    """
    merged: dict[int, float] = {}
    for atom in atoms:
        if len(atom) != 2:
            raise PmfError(f"atom {atom!r} is not a (value, mass) pair")
        value, mass = atom
        if isinstance(value, float):
            if not value.is_integer():
                raise PmfError(f"value {value!r} is not an integer")
            value = int(value)
        if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
            raise PmfError(f"value {value!r} is not an integer")
        value = int(value)
        if value < 0:
            raise PmfError(f"negative value {value}")
        if value > MAX_VALUE:
            raise PmfError(f"value {value} exceeds the supported bound {MAX_VALUE}")
        mass = float(mass)
        if not math.isfinite(mass) or mass < 0:
            raise PmfError(f"invalid mass {mass!r} for value {value}")
        merged[value] = merged.get(value, 0.0) + mass
    total = math.fsum(merged.values())
    if not merged or abs(total - 1.0) > MASS_TOL:
        raise PmfError(f"masses sum to {total!r}, expected 1")
    kept = sorted((v, m) for v, m in merged.items() if m > 0)
    if all(v == 0 for v, _ in kept):
        raise PmfError("law is identically zero")
    values = tuple(v for v, _ in kept)
    masses = tuple(m / total for _, m in kept)
    return Pmf(values, masses)


def moments(p: Pmf) -> MomentSummary:
    mean = p.mean
    second = math.fsum(v * v * m for v, m in p.atoms)
    variance = max(second - mean * mean, 0.0)
    p0 = p.p0
    m1 = mean / math.fsum(m for v, m in p.atoms if v > 0)
    m2 = second / mean
    m0 = p0 * m1
    alpha = -math.log(p0) / math.log1p(mean) if p0 > 0 else None
    return MomentSummary(mean, second, variance, m1, m2, m0, alpha)


def condition_nonzero(p: Pmf) -> Pmf:
    """Law of ``L`` conditioned on ``L != 0``."""
    if p.values[0] != 0:
        return p
    rest = 1.0 - p.masses[0]
    return Pmf(p.values[1:], tuple(m / rest for m in p.masses[1:]))


def thin(p: Pmf, u: float) -> Pmf:
    """``(1 - u) delta_0 + u p``."""
    if not 0.0 < u <= 1.0:
        raise PmfError(f"thinning parameter u={u!r} outside (0, 1]")
    if u == 1.0:
        return p
    values = p.values
    masses = [u * m for m in p.masses]
    if values[0] == 0:
        masses[0] += 1.0 - u
    else:
        values = (0,) + values
        masses.insert(0, 1.0 - u)
    return Pmf(tuple(values), tuple(masses))


def _check_s(s):
    arr = np.asarray(s, dtype=np.float64)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ValueError("s must lie in [0, 1]")
    return arr


def pgf(p: Pmf, s):
    """``E{s^L}`` with the convention ``0**0 == 1``; vectorized over ``s``."""
    arr = _check_s(s)
    out = 1.0 - one_minus_pgf(p, arr)
    return float(out) if np.ndim(s) == 0 else out


def one_minus_pgf(p: Pmf, s):
    """``1 - E{s^L}`` evaluated without cancellation near ``s = 1``."""
    arr = np.asarray(s, dtype=np.float64)
    with np.errstate(divide="ignore"):
        logs = np.log(arr)
    acc = np.zeros_like(arr)
    for v, m in p.atoms:
        if v == 0:
            continue
        acc = acc - m * np.expm1(v * logs)
    return acc


def sample(p: Pmf, rng: np.random.Generator) -> int:
    """One inverse-CDF draw consuming exactly one uniform from ``rng``."""
    u = rng.random()
    return p.values[int(np.searchsorted(p.cdf, u, side="right"))]


def sample_many(p: Pmf, rng: np.random.Generator, size: int) -> np.ndarray:
    u = rng.random(size)
    return p.value_array[np.searchsorted(p.cdf, u, side="right")]


def pmf_from_json(obj) -> Pmf:
    """Accept ``{"pmf": [[v, m], ...]}``, a bare list of pairs, or a JSON string of either."""
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    if isinstance(obj, dict):
        if "pmf" not in obj:
            raise PmfError('expected an object with a "pmf" key')
        obj = obj["pmf"]
    if not isinstance(obj, list):
        raise PmfError("pmf must be a list of [value, mass] pairs")
    return validate(obj)


def pmf_to_json(p: Pmf) -> dict:
    return {"pmf": [[v, m] for v, m in p.atoms]}
