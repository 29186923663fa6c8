"""Verification suites and report emission.

Each suite runs a fixed set of numerical checks under one seed and returns a
:class:`VerifyReport`.  A check compares a measured number with a bound under
a relation (``eq``: ``|measured - bound| <= tolerance``; ``le``:
``measured <= bound + tolerance``; ``ge``: ``measured >= bound - tolerance``)
and names the statement it exercises.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .distributions import Pmf, condition_nonzero, moments, pgf, validate
from .gclass import curvature, curvature_limit, phi, s_grid, min_over_grid
from .products import cramer_rate, estimate_rho, tail_fraction, theorem6_crosscheck
from .recursion import convexity_check, prop71_bound, recursion_residuals, solve_h
from .simulate import estimate_H, estimate_h, homogeneous, read_h, regular_tree_oracle_h

__all__ = [
    "Check",
    "VerifyReport",
    "SUITES",
    "UnknownSuite",
    "verify_suite",
    "emit",
    "report_from_json",
    "REPORT_SCHEMA",
    "CHECK_FIELDS",
]

CHECK_FIELDS = ("name", "statement", "status", "relation", "measured", "bound", "tolerance")
STATUSES = ("pass", "fail", "skip")

REPORT_SCHEMA = {
    "type": "object",
    "required": ["suite", "seed", "passed", "checks"],
    "additionalProperties": False,
    "properties": {
        "suite": {"type": "string"},
        "seed": {"type": "integer"},
        "passed": {"type": "boolean"},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": list(CHECK_FIELDS),
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "statement": {"type": "string"},
                    "status": {"enum": list(STATUSES)},
                    "relation": {"enum": ["eq", "le", "ge"]},
                    "measured": {"type": ["number", "string"]},
                    "bound": {"type": ["number", "string"]},
                    "tolerance": {"type": ["number", "string"]},
                },
            },
        },
    },
}


class UnknownSuite(KeyError):
    pass


@dataclass(frozen=True)
class Check:
    name: str
    statement: str
    status: str
    relation: str
    measured: float
    bound: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def check(name, statement, measured, bound, tolerance=0.0, relation="eq") -> Check:
    m, b, t = float(measured), float(bound), float(tolerance)
    if relation == "eq":
        ok = abs(m - b) <= t
    elif relation == "le":
        ok = m <= b + t
    elif relation == "ge":
        ok = m >= b - t
    else:
        raise ValueError(f"unknown relation {relation!r}")
    return Check(name, statement, "pass" if ok else "fail", relation, m, b, t)


def flag(name, statement, value: bool, expected: bool = True) -> Check:
    return check(name, statement, float(bool(value)), float(bool(expected)), 0.0, "eq")


@dataclass
class VerifyReport:
    suite: str
    seed: int
    checks: list[Check] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)


# -- formatting ---------------------------------------------------------------

def _num(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _json_num(x: float) -> str:
    s = _num(x)
    return json.dumps(s) if s in ("nan", "inf", "-inf") else s


def emit(report: VerifyReport, fmt: str = "csv") -> bytes:
    """Serialize ``report``; floats carry 17 significant digits and wall time is left out."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CHECK_FIELDS)
        for c in report.checks:
            w.writerow([c.name, c.statement, c.status, c.relation, _num(c.measured),
                        _num(c.bound), _num(c.tolerance)])
        return buf.getvalue().encode()
    if fmt == "json":
        rows = []
        for c in report.checks:
            rows.append("{" + ", ".join([
                f'"name": {json.dumps(c.name)}',
                f'"statement": {json.dumps(c.statement)}',
                f'"status": {json.dumps(c.status)}',
                f'"relation": {json.dumps(c.relation)}',
                f'"measured": {_json_num(c.measured)}',
                f'"bound": {_json_num(c.bound)}',
                f'"tolerance": {_json_num(c.tolerance)}',
            ]) + "}")
        body = ",\n    ".join(rows)
        checks = f"[\n    {body}\n  ]" if rows else "[]"
        text = (f'{{\n  "suite": {json.dumps(report.suite)},\n  "seed": {int(report.seed)},\n'
                f'  "passed": {json.dumps(report.passed)},\n  "checks": {checks}\n}}\n')
        return text.encode()
    raise ValueError(f"unknown format {fmt!r}")


def _parse_num(v) -> float:
    return float(v)


def report_from_json(data: bytes | str) -> VerifyReport:
    obj = json.loads(data)
    checks = [Check(c["name"], c["statement"], c["status"], c["relation"], _parse_num(c["measured"]),
                    _parse_num(c["bound"]), _parse_num(c["tolerance"])) for c in obj["checks"]]
    return VerifyReport(obj["suite"], int(obj["seed"]), checks)


# -- suites -------------------------------------------------------------------

BERNOULLI_HALF = [(0, 0.5), (2, 0.5)]
TWO_ATOM = [(1, 0.9), (9, 0.1)]
DELTA1 = [(1, 1.0)]


def _suite_theorem1(seed, pmf=None, reps=100_000, **_):
    out = []
    oracle = regular_tree_oracle_h(1, 1.0, 3, 6.0)
    est = estimate_h(homogeneous(validate(DELTA1), 3), [6.0], reps, seed)[0]
    out.append(check("yule_k3_t6_mc_vs_quadrature", "Theorem 1", est.value, oracle, 3 * est.stderr))
    out.append(check("yule_k3_t6_quadrature_near_limit", "Theorem 1", oracle, 0.5, 0.02))
    out.append(check("yule_k3_t6_censored", "Theorem 1", est.censored, 0, 0))
    closed = regular_tree_oracle_h(1, 1.0, 1, 1.0)
    quad = regular_tree_oracle_h(1, 1.0, 1, 1.0, quadrature=True)
    out.append(check("yule_k1_t1_closed_vs_quadrature", "Theorem 1", quad, closed, 1e-8))
    e1 = estimate_h(homogeneous(validate(DELTA1), 1), [1.0], reps, seed)[0]
    out.append(check("yule_k1_t1_mc_vs_closed", "Theorem 1", e1.value, closed, 3 * e1.stderr))
    return out


def _bernoulli_exact(lam, i):
    return -math.log1p(lam * i) / math.log1p(-lam)


def _suite_bernoulli(seed, pmf=None, **_):
    out = []
    cases = [("half", BERNOULLI_HALF, 1.0), ("quarter", [(0, 0.75), (2, 0.25)], 0.29248)]
    for label, atoms, stated in cases:
        p = validate(atoms)
        br = curvature(p, 1e-4)
        out.append(check(f"bernoulli_{label}_width", "Bernoulli exact curvature", br.width, 1e-4,
                         0.0, "le"))
        out.append(check(f"bernoulli_{label}_brackets_stated_value", "Bernoulli exact curvature",
                         br.mid, stated, 1e-4 + br.width / 2))
        lam = p.masses[-1]
        exact = _bernoulli_exact(lam, p.values[-1])
        out.append(check(f"bernoulli_{label}_brackets_formula", "Bernoulli exact curvature",
                         br.mid, exact, 1e-4 + br.width / 2))
    return out


def _suite_theorem5(seed, pmf=None, **_):
    laws = [pmf] if pmf is not None else [validate(BERNOULLI_HALF),
                                          validate([(0, 0.5), (1, 0.25), (3, 0.25)]),
                                          validate([(2, 1.0)])]
    us = [0.5, 0.2, 0.1, 0.05, 0.02, 0.01]
    tol = 1e-4
    out = []
    for j, p in enumerate(laws):
        tag = f"law{j}"
        ms = moments(p)
        table = curvature_limit(p, us, tol)
        out.append(check(f"{tag}_u0.01_near_m2", "Theorem 5", table[0.01].mid, ms.m2, 0.05))
        worst = min(table[b].hi - table[a].lo for a, b in zip(us, us[1:]))
        out.append(check(f"{tag}_nonincreasing_in_u", "Proposition 2.10", worst, 0.0, tol, "ge"))
        lo_gap = min(table[u].lo - (ms.m2 - u * ms.mean) / (1 + u * ms.mean) for u in us)
        hi_gap = max(table[u].hi - ms.m2 for u in us)
        out.append(check(f"{tag}_above_lower_bound", "Theorem 5", lo_gap, 0.0, tol, "ge"))
        out.append(check(f"{tag}_below_m2", "Theorem 5", hi_gap, 0.0, tol, "le"))
    return out


def _suite_theorem2(seed, pmf=None, reps=100_000, ks=(6, 7, 10), **_):
    p = pmf if pmf is not None else validate(TWO_ATOM)
    ms = moments(p)
    table = solve_h(condition_nonzero(p), None, max(ks) + 30)
    out = []
    for k in ks:
        lo, hi = table.row(k)
        out.append(check(f"k{k}_lo_above_m1_bound", "Theorem 2(b)", lo, 1 / (k - ms.m1), 0.0, "ge"))
        out.append(Check(f"k{k}_lo_strict", "Theorem 2(b)",
                         "pass" if lo > 1 / (k - ms.m1) else "fail", "ge", lo, 1 / (k - ms.m1), 0.0))
        if k > ms.m2:
            out.append(check(f"k{k}_hi_below_m2_bound", "Theorem 2(c)", hi, 1 / (k - ms.m2), 0.0, "le"))
        rd = read_h(homogeneous(p, k), reps, seed)
        e = rd.estimate
        out.append(check(f"k{k}_mc_above_bracket", "Theorem 2(c)", e.value, lo, 3 * e.stderr, "ge"))
        out.append(check(f"k{k}_mc_below_bracket", "Theorem 2(c)", e.value, hi, 3 * e.stderr, "le"))
    return out


def _suite_theorem4(seed, pmf=None, reps=100_000, **_):
    p = pmf if pmf is not None else validate(BERNOULLI_HALF)
    m2 = moments(p).m2
    k = 3 if pmf is None else int(math.floor(m2)) + 1
    ests = estimate_H(p, k, [5, 10, 20], None, reps, seed)
    e20 = ests[-1]
    out = [check("H20_below_limit_bound", "Theorem 4", e20.value, 1 / (k - m2), 3 * e20.stderr, "le"),
           check("H_censored", "Theorem 4", e20.censored, 0, 0)]
    for a, b in zip(ests, ests[1:]):
        comb = math.hypot(a.stderr, b.stderr)
        out.append(check(f"H{int(a.t_or_n)}_le_H{int(b.t_or_n)}", "Definition 2.4",
                         a.value, b.value, 3 * comb, "le"))
    return out


def _suite_theorem6(seed, pmf=None, k=None, **_):
    out = []
    if pmf is None:
        cases = [("delta1_k3", validate(DELTA1), 3, 10_000, 10),
                 ("two_atom_k7", validate(TWO_ATOM), 7, 10_000, 10_000),
                 ("zero_mass_k3", validate([(0, 0.25), (1, 0.5), (3, 0.25)]), 3, 10_000, 10_000)]
    else:
        kk = k if k is not None else math.floor(moments(pmf).m1) + 2
        cases = [("law", pmf, kk, 10_000, 10_000)]
    for label, p, kk, n, reps in cases:
        r = theorem6_crosscheck(p, kk, n, reps, seed)
        out.append(check(f"{label}_unconditioned", "Theorem 6", r.err_unconditioned, 0.0,
                         r.tol_unconditioned, "le"))
        out.append(check(f"{label}_conditioned", "Theorem 6", r.err_conditioned, 0.0,
                         r.tol_conditioned, "le"))
    return out


def _suite_dichotomy(seed, pmf=None, n=2000, reps=10_000, **_):
    p = pmf if pmf is not None else validate(BERNOULLI_HALF)
    m0 = moments(p).m0
    xs = (0.8, 1.5) if pmf is None else (0.8 * m0 if m0 > 0 else None, m0 + 0.5)
    out = []
    if xs[0] is not None:
        below = estimate_rho(xs[0], p, n, reps, seed)
        out.append(flag("below_m0_diverging", "Proposition 8.4", below.diverging, True))
    above = estimate_rho(xs[1], p, n, reps, seed)
    out.append(flag("above_m0_finite", "Corollary 8.6", above.diverging, False))
    out.append(check("above_m0_growth_ratio", "Corollary 8.6", above.growth_ratio,
                     above.threshold, 0.0, "le"))
    return out


def _suite_cramer(seed, pmf=None, paths=100_000, n=50, **_):
    p = validate(BERNOULLI_HALF)
    y = 0.5
    r = cramer_rate(p, y)
    oracle = 0.5 * (3**0.25 + 3**-0.75)
    frac = tail_fraction(p, n, y, paths, seed)
    return [check("rate_vs_stationary_point", "Lemma 8.8", r.r, oracle, 1e-4),
            check("tail_fraction_below_rate_power", "Lemma 8.8", frac, r.r**n, 0.0, "le")]


def _prop71_exact(m1: Fraction, m2: Fraction, k: int, ell: int) -> Fraction:
    prod = Fraction(1)
    for i in range(ell):
        prod *= 1 + m1 / (k + i - m1)
    return prod / (k + ell - m2)


def _suite_prop71(seed, pmf=None, reps=100_000, **_):
    p = validate(TWO_ATOM)
    m1, m2 = Fraction(9, 5), Fraction(5)
    k = 2
    b4, _, _ = prop71_bound(p, k, 4)
    bopt, used, ell_opt = prop71_bound(p, k)
    out = [check("ell4_formula", "Proposition 7.1", b4, float(_prop71_exact(m1, m2, k, 4)), 1e-6),
           check("ell_optimal", "Proposition 7.1", ell_opt, 8, 0),
           check("ell8_formula", "Proposition 7.1", bopt, float(_prop71_exact(m1, m2, k, 8)), 1e-6),
           check("optimal_beats_ell4", "Proposition 7.1", bopt, b4, 0.0, "le")]
    lo, hi = solve_h(p, k, k + 30).row(k)
    out.append(check("solver_below_bound", "Proposition 7.1", hi, bopt, 0.0, "le"))
    rd = read_h(homogeneous(p, k), reps, seed)
    e = rd.estimate
    out.append(check("bound_above_mc", "Proposition 7.1", bopt, e.value, 3 * e.stderr, "ge"))
    return out


def _random_pmf(rng: np.random.Generator) -> Pmf:
    while True:
        n = int(rng.integers(2, 6))
        vals = rng.choice(np.arange(0, 9), size=n, replace=False)
        if np.count_nonzero(vals) < 2:
            continue
        w = rng.dirichlet(np.ones(n))
        return validate([(int(v), float(x)) for v, x in zip(vals, w)])


def _suite_properties(seed, pmf=None, reps=20_000, **_):
    rng = np.random.default_rng(seed)
    laws = [_random_pmf(rng) for _ in range(20)]
    grid = s_grid()
    out = []
    worst_above, worst_below = math.inf, -math.inf
    for p in laws:
        m2 = moments(p).m2
        above, _ = min_over_grid(lambda s: phi(p, m2 + 1e-6, s), grid)
        below, _ = min_over_grid(lambda s: phi(p, m2 * (1 - 1e-2), s), grid)
        worst_above = min(worst_above, above)
        worst_below = max(worst_below, below)
    out.append(check("phi_nonnegative_above_m2", "Lemma 6.2", worst_above, 0.0, 1e-9, "ge"))
    out.append(Check("phi_negative_below_m2", "Lemma 6.2", "pass" if worst_below < 0 else "fail",
                     "le", worst_below, 0.0, 0.0))

    s = np.linspace(0.0, 1.0, 1001)
    worst_d1, worst_d2 = math.inf, math.inf
    for p in laws:
        f = pgf(p, s)
        worst_d1 = min(worst_d1, float(np.min(np.diff(f))))
        worst_d2 = min(worst_d2, float(np.min(np.diff(f, 2))))
    out.append(check("pgf_nondecreasing", "Definition 2.2", worst_d1, 0.0, 1e-15, "ge"))
    out.append(check("pgf_convex", "Definition 2.2", worst_d2, 0.0, 1e-15, "ge"))

    worst_cx, worst_res = math.inf, -math.inf
    for p in [validate(TWO_ATOM)] + laws[:5]:
        c = condition_nonzero(p)
        t = solve_h(c, None, 60)
        worst_cx = min(worst_cx, convexity_check(t)[1])
        ks, res = recursion_residuals(c, t)
        worst_res = max(worst_res, float(np.max(res - t.width[ks - t.k_min])))
    out.append(check("solver_table_convex", "Proposition 2.11", worst_cx, 0.0, 1e-9, "ge"))
    out.append(check("recursion_residual_within_width", "Proposition 4.3", worst_res, 0.0, 0.0, "le"))

    # u-thinned discrete chain against the continuous Yule oracle at t = 1
    target = regular_tree_oracle_h(1, 1.0, 2, 1.0)
    prev = None
    for u in (0.2, 0.1, 0.05):
        e = estimate_H(validate(DELTA1), 2, int(math.floor(1.0 / u)), u, reps * 5, seed)
        gap = abs(e.value - target)
        if prev is not None:
            tol = 3 * math.hypot(e.stderr, prev[1])
            out.append(check(f"thinned_gap_u{u}", "Thinned chain limit", gap, prev[0], tol, "le"))
        prev = (gap, e.stderr)

    p = validate(TWO_ATOM)
    a = estimate_h(homogeneous(p, 7), [1.0, 2.0], 2000, seed, threads=1)
    b = estimate_h(homogeneous(p, 7), [1.0, 2.0], 2000, seed, threads=4)
    out.append(flag("threads_ct_identical", "Definition 1.1", a == b))
    a = estimate_H(validate(BERNOULLI_HALF), 3, [5, 15], None, 2000, seed, threads=1)
    b = estimate_H(validate(BERNOULLI_HALF), 3, [5, 15], None, 2000, seed, threads=4)
    out.append(flag("threads_dt_identical", "Definition 2.4", a == b))
    a = estimate_rho(1.5, validate(BERNOULLI_HALF), 500, 2000, seed, threads=1)
    b = estimate_rho(1.5, validate(BERNOULLI_HALF), 500, 2000, seed, threads=4)
    out.append(flag("threads_rho_identical", "Definition 8.1", a == b))
    return out


SUITES = {
    "theorem1": _suite_theorem1,
    "bernoulli": _suite_bernoulli,
    "theorem5": _suite_theorem5,
    "theorem2": _suite_theorem2,
    "theorem4": _suite_theorem4,
    "theorem6": _suite_theorem6,
    "dichotomy": _suite_dichotomy,
    "cramer": _suite_cramer,
    "prop71": _suite_prop71,
    "properties": _suite_properties,
}


def verify_suite(name: str, seed: int = 42, pmf: Pmf | None = None, **kwargs) -> VerifyReport:
    """Run suite ``name``; ``pmf`` swaps in a different law where the suite allows it."""
    if name not in SUITES:
        raise UnknownSuite(name)
    if seed is None:
        raise ValueError("a seed is required")
    start = time.perf_counter()
    checks = SUITES[name](int(seed), pmf, **kwargs)
    return VerifyReport(name, int(seed), checks, time.perf_counter() - start)
