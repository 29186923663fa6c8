from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

from harmonia.distributions import condition_nonzero, moments, validate
from harmonia.recursion import (HBracketTable, InfiniteRegime, convexity_check, default_tail,
                                lower_bound_iter, prop71_bound, recursion_residuals, solve_h)

from conftest import pmfs


@pytest.mark.parametrize("i", [1, 2, 4])
def test_deterministic_law_collapses(i):
    t = solve_h(validate([(i, 1.0)]), i + 1, i + 30)
    assert np.array_equal(t.lo, t.hi)
    assert np.array_equal(t.lo, 1.0 / (t.ks - i))


def test_deterministic_fixed_point():
    for i in (1, 3):
        for k in range(i + 1, i + 10):
            assert (k - i) * (1 / (k - i)) - k * (1 / (k + i - i)) == 0


def test_two_atom_k7_bracket(two_atom):
    t = solve_h(two_atom, None, 40)
    lo, hi = t.row(7)
    assert 1 / 5.2 <= lo <= hi <= 0.5
    assert hi - lo < 5e-4
    assert t.k_min == 2


def test_bracket_invariants(two_atom):
    t = solve_h(two_atom, None, 60)
    ks = t.ks.astype(float)
    assert np.all(t.lo <= t.hi)
    assert np.all(t.lo >= 1 / (ks - 1.8))
    assert np.all(t.lo >= 1 / ks)
    above = ks > 5
    assert np.all(t.hi[above] <= 1 / (ks[above] - 5))
    assert all(w2 <= w1 for w1, w2 in zip(t.sweep_widths, t.sweep_widths[1:]))


def test_lower_bound_first_improvement(two_atom):
    t = solve_h(two_atom, None, 60)
    ks = t.ks.astype(float)
    m = 1.8
    assert np.all(t.lo > 1 / (ks - m))
    assert np.all(t.lo >= ks / ((ks - m) * (ks + m)) - 1e-15)


def test_upper_row_squeezes(two_atom):
    t = solve_h(two_atom, None, 400)
    k = t.k_max
    assert abs(k * t.row(k)[1] - 1) <= 2 * 5 / k


def test_forms_agree():
    p = validate([(0, 0.1), (1, 0.45), (9, 0.45)])
    a = solve_h(p, None, 40)
    b = solve_h(condition_nonzero(p), None, 40)
    assert a.k_min == b.k_min
    assert np.allclose(a.lo, b.lo, rtol=1e-10, atol=0)
    assert np.allclose(a.hi, b.hi, rtol=1e-10, atol=0)


def test_infinite_regime(delta1, two_atom):
    with pytest.raises(InfiniteRegime, match="infinite"):
        solve_h(delta1, 1, 5)
    with pytest.raises(InfiniteRegime):
        solve_h(two_atom, 1, 5)
    with pytest.raises(ValueError):
        solve_h(two_atom, 2, 10, k_tail=4)
    with pytest.raises(ValueError):
        solve_h(two_atom, 5, 3)


def test_table_metadata(two_atom):
    t = solve_h(two_atom, 3, 8)
    assert t.k_tail == default_tail(8, two_atom) == 8 + 250 + 9
    assert t.pmf_digest == two_atom.digest()
    assert sorted(t.rows) == list(range(3, 9))
    with pytest.raises(KeyError):
        t.row(9)


def prop71_oracle(m1, m2, k, ell):
    prod = Fraction(1)
    for i in range(ell):
        prod *= 1 + m1 / (k + i - m1)
    return float(prod / (k + ell - m2))


def test_prop71_values(two_atom):
    b4, used, opt = prop71_bound(two_atom, 2, 4)
    assert used == 4 and opt == 8
    assert b4 == pytest.approx(prop71_oracle(Fraction(9, 5), Fraction(5), 2, 4), abs=1e-6)
    assert b4 == pytest.approx(71.023, abs=1e-3)
    best, used, _ = prop71_bound(two_atom, 2)
    assert used == 8
    assert best == pytest.approx(prop71_oracle(Fraction(9, 5), Fraction(5), 2, 8), abs=1e-6)
    assert best == pytest.approx(44.06, abs=1e-2)
    assert best < b4


def test_prop71_optimum_is_minimum(two_atom):
    # k + ell = 9 sits on the threshold, so ell = 7 and ell = 8 tie
    bounds = {ell: prop71_bound(two_atom, 2, ell)[0] for ell in range(4, 20)}
    assert bounds[7] == pytest.approx(bounds[8], rel=1e-14)
    assert all(bounds[8] <= b * (1 + 1e-14) for b in bounds.values())


def test_prop71_degenerate(two_atom):
    assert prop71_bound(two_atom, 7, 0)[0] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        prop71_bound(two_atom, 2, 2)
    with pytest.raises(InfiniteRegime):
        prop71_bound(two_atom, 1)
    # m1 = 1 takes the guarded branch
    p = validate([(1, 0.5), (2, 0.5)])
    _, _, opt = prop71_bound(p, 2)
    assert 2 + opt > moments(p).m2


def test_prop71_bounds_solver(two_atom):
    t = solve_h(two_atom, None, 40)
    for k in range(2, 12):
        assert t.row(k)[1] <= prop71_bound(two_atom, k)[0]


def test_lower_bound_iter():
    assert lower_bound_iter(1, 3, 0) == pytest.approx(1 / 3)
    assert lower_bound_iter(1, 3, 1) == pytest.approx(0.375)
    assert lower_bound_iter(1, 3, 10**6) == pytest.approx(0.5, abs=1e-5)
    with pytest.raises(ValueError):
        lower_bound_iter(2, 2, 1)


def test_convexity_check(delta1, two_atom):
    assert convexity_check(solve_h(delta1, 2, 30))[0]
    t = solve_h(two_atom, None, 40)
    ok, worst = convexity_check(t)
    assert ok and worst >= -1e-9
    d = solve_h(delta1, 2, 30)
    bad = HBracketTable(d.k_min, d.k_max, d.lo.copy(), d.hi.copy(), "", d.m1, d.m2, 0, 1)
    bad.hi[5 - d.k_min] *= 0.9
    assert not convexity_check(bad)[0]
    short = HBracketTable(2, 3, t.lo[:2], t.hi[:2], "", t.m1, t.m2, 0, 1)
    with pytest.raises(ValueError):
        convexity_check(short)


@settings(max_examples=15, deadline=None)
@given(pmfs(min_nonzero=1))
def test_random_tables(p):
    c = condition_nonzero(p)
    t = solve_h(c, None, 50)
    assert np.all(t.lo <= t.hi)
    assert convexity_check(t)[0]
    ks, res = recursion_residuals(c, t)
    if ks.size:
        rows = ks - t.k_min
        assert np.all(res <= t.width[rows] + 8 * np.finfo(float).eps * t.mid[rows])


def test_backends_agree(two_atom):
    a = solve_h(two_atom, None, 40, backend="compiled")
    b = solve_h(two_atom, None, 40, backend="pure")
    assert np.array_equal(a.lo, b.lo) and np.array_equal(a.hi, b.hi)
