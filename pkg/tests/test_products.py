import math

import numpy as np
import pytest

from harmonia.distributions import moments, validate
from harmonia.montecarlo import replicate_stream
from harmonia.products import (CramerRate, cramer_rate, estimate_rho, rho_recursion_residual,
                               simulate_R, tail_fraction, theorem6_crosscheck)
from harmonia.recursion import InfiniteRegime


def telescoped(x, n):
    return math.log((x + n + 1) / x)


@pytest.mark.parametrize("x,n", [(2.0, 0), (2.0, 10), (0.3, 500), (7.5, 3)])
def test_simulate_R_telescopes(delta1, x, n):
    got = simulate_R(x, delta1, n, np.random.default_rng(0))
    assert got == pytest.approx(telescoped(x, n), rel=1e-12)


def test_simulate_R_single_factor(bern_half):
    assert simulate_R(2.0, bern_half, 0, np.random.default_rng(0)) == pytest.approx(math.log(1.5))


def test_simulate_R_replay_matches_kernel(bern_half):
    from harmonia.products import _log_products
    logs = _log_products(1.5, bern_half, [40], 20, 3, 1, None)
    for r in range(20):
        assert simulate_R(1.5, bern_half, 40, replicate_stream(3, r)) == pytest.approx(logs[r, 0],
                                                                                       rel=1e-14)
    with pytest.raises(ValueError):
        simulate_R(0.0, bern_half, 1, np.random.default_rng(0))


def test_estimate_rho_delta(delta1):
    e = estimate_rho(2.0, delta1, 10_000, 10, 42)
    assert e.value == pytest.approx((2 + 10_001) / (2 * 10_000), rel=1e-12)
    assert e.stderr == 0.0
    assert e.extrapolated == pytest.approx(0.5, rel=1e-12)
    assert not e.diverging


def test_estimate_rho_dichotomy(bern_half):
    below = estimate_rho(0.8, bern_half, 2000, 10_000, 42)
    above = estimate_rho(1.5, bern_half, 2000, 10_000, 42)
    assert below.diverging
    assert not above.diverging
    assert above.growth_ratio <= above.threshold == 1.5


def test_estimate_rho_lower_bound(bern_half, two_atom):
    for p, x in ((bern_half, 1.5), (two_atom, 3.0)):
        n = 400
        e = estimate_rho(x, p, n, 5000, 7)
        assert e.value >= (1 + (n + 1) * p.mean / x) / n - 3 * e.stderr


def test_estimate_rho_nonincreasing_in_x(two_atom):
    xs = [2.0, 3.0, 5.0, 8.0]
    ests = [estimate_rho(x, two_atom, 500, 5000, 11) for x in xs]
    for a, b in zip(ests, ests[1:]):
        assert b.value <= a.value + 3 * math.hypot(a.stderr, b.stderr)


def test_estimate_rho_scaling(bern_half):
    scaled = validate([(0, 0.5), (4, 0.5)])
    a = estimate_rho(1.5, bern_half, 1000, 10_000, 5)
    b = estimate_rho(3.0, scaled, 1000, 10_000, 5)
    assert abs(a.extrapolated - b.extrapolated) <= 3 * math.hypot(a.extrapolated_stderr,
                                                                  b.extrapolated_stderr)


def test_squeeze_for_lattice_x(two_atom):
    ms = moments(two_atom)
    for x in (6, 8):
        e = estimate_rho(x - ms.mean, two_atom, 4000, 5000, 13)
        assert ms.mean / x <= e.extrapolated + 3 * e.extrapolated_stderr
        assert e.extrapolated <= ms.mean / (x - ms.m2) + 3 * e.extrapolated_stderr


def test_estimate_rho_errors(bern_half):
    with pytest.raises(ValueError):
        estimate_rho(0.0, bern_half, 10, 10, 1)
    with pytest.raises(ValueError):
        estimate_rho(1.0, bern_half, 0, 10, 1)


def test_rho_recursion_residual_exact(delta1):
    assert rho_recursion_residual(2.0, delta1, lambda x: 1 / x) == pytest.approx(0.0, abs=1e-16)
    with pytest.raises(KeyError):
        rho_recursion_residual(2.0, delta1, {2.0: 0.5})
    assert rho_recursion_residual(2.0, delta1, {2.0: 0.5, 3.0: 1 / 3}) == pytest.approx(0.0)


def test_rho_recursion_residual_monte_carlo(bern_half):
    x, n, reps = 2.0, 3000, 20_000
    table, ses = {}, {}
    for v in (x, x + 2):
        e = estimate_rho(v, bern_half, n, reps, 17)
        table[v], ses[v] = e.extrapolated, e.extrapolated_stderr
    for v in (x,):
        table_ok = table[v] * v > bern_half.mean
        assert table_ok
    res = rho_recursion_residual(x, bern_half, {x: table[x], x + 0: table[x], x + 2: table[x + 2]})
    # residual = x r(x) - (x + 1)(r(x)/2 + r(x+2)/2)
    prop = math.hypot((x - (x + 1) / 2) * ses[x], (x + 1) / 2 * ses[x + 2])
    assert abs(res) <= 3 * prop + 1e-3


def test_cramer_rate_bernoulli(bern_half):
    r = cramer_rate(bern_half, 0.5)
    assert r.r == pytest.approx(0.5 * (3**0.25 + 3**-0.75), abs=1e-10)
    assert math.exp(2 * r.t) == pytest.approx(3.0, rel=1e-6)
    assert not r.at_boundary


def test_cramer_rate_boundary(bern_half):
    assert cramer_rate(bern_half, 1.0) == CramerRate(1.0, 0.0, True)
    assert cramer_rate(bern_half, 3.0).at_boundary
    with pytest.raises(ValueError):
        cramer_rate(bern_half, 0.0)


def test_cramer_rate_against_grid():
    p = validate([(0, 0.2), (1, 0.3), (4, 0.5)])
    y = 0.9
    ts = np.linspace(0, 20, 200001)
    brute = np.min(np.exp(ts * y) * (0.2 + 0.3 * np.exp(-ts) + 0.5 * np.exp(-4 * ts)))
    assert cramer_rate(p, y).r == pytest.approx(brute, abs=1e-8)


def test_tail_fraction_bound(bern_half):
    r = cramer_rate(bern_half, 0.5).r
    frac = tail_fraction(bern_half, 50, 0.5, 100_000, 42)
    assert frac <= r**50
    assert tail_fraction(bern_half, 50, 0.5, 1000, 1) == tail_fraction(bern_half, 50, 0.5, 1000, 1)


def test_theorem6_delta(delta1):
    r = theorem6_crosscheck(delta1, 3, 10_000, 10, 42)
    assert r.passed
    assert r.h_lo == r.h_hi == 0.5
    assert r.h_unconditioned == pytest.approx(0.5, rel=1e-12)
    assert r.se_unconditioned == 0.0


def test_theorem6_two_atom(two_atom):
    r = theorem6_crosscheck(two_atom, 7, 10_000, 10_000, 42)
    assert r.passed
    assert r.err_unconditioned <= 3 * r.se_unconditioned + (r.h_hi - r.h_lo) + 1e-9


def test_theorem6_forms_agree_with_zero_mass():
    p = validate([(0, 0.25), (1, 0.5), (3, 0.25)])
    r = theorem6_crosscheck(p, 3, 5000, 10_000, 42)
    assert r.passed
    comb = math.hypot(r.se_unconditioned, r.se_conditioned)
    assert abs(r.h_unconditioned - r.h_conditioned) <= 3 * comb


def test_theorem6_infinite(two_atom):
    with pytest.raises(InfiniteRegime):
        theorem6_crosscheck(two_atom, 1, 100, 10, 1)
