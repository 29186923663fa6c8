"""Acceptance criteria, each run at its stated tolerance with seed 42.

Every criterion prints one ``criterion N: PASS|FAIL`` line, shown in the
terminal summary.  Run standalone with ``python tests/test_acceptance.py``.
"""

import sys

import pytest

from harmonia.verify import verify_suite

SEED = 42

# (number, suite, runtime budget in seconds)
CRITERIA = [
    (1, "theorem1", 120),
    (2, "bernoulli", 10),
    (3, "theorem5", 60),
    (4, "theorem2", 300),
    (5, "theorem4", 120),
    (6, "theorem6", 180),
    (7, "dichotomy", 60),
    (8, "cramer", 30),
    (9, "prop71", 180),
    (10, "properties", 300),
]

RESULTS: list[str] = []


def evaluate(number, suite, budget):
    report = verify_suite(suite, SEED)
    failed = [c.name for c in report.checks if c.status != "pass"]
    in_time = report.wall_time < budget
    ok = report.passed and in_time
    detail = f"{len(report.checks)} checks, {report.wall_time:.1f} s of {budget} s"
    if failed:
        detail += "; failed: " + ", ".join(failed)
    if not in_time:
        detail += "; over runtime budget"
    line = f"criterion {number} ({suite}): {'PASS' if ok else 'FAIL'} [{detail}]"
    return ok, line


@pytest.mark.slow
@pytest.mark.parametrize("number,suite,budget", CRITERIA, ids=[f"c{n}_{s}" for n, s, _ in CRITERIA])
def test_criterion(number, suite, budget):
    ok, line = evaluate(number, suite, budget)
    RESULTS.append(line)
    print(line)
    assert ok, line


if __name__ == "__main__":
    outcomes = [evaluate(*c) for c in CRITERIA]
    for _, line in outcomes:
        print(line)
    sys.exit(0 if all(ok for ok, _ in outcomes) else 1)
