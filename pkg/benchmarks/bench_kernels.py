"""Time the compiled kernels against the pure-Python twin and check they agree.

    python benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import math
import time

import numpy as np

from harmonia import _backend
from harmonia.distributions import validate
from harmonia.products import _log_products
from harmonia.recursion import solve_h
from harmonia.simulate import Model, Segment, estimate_H, estimate_h

BERN = validate([(0, 0.5), (2, 0.5)])
TWO = validate([(1, 0.9), (9, 0.1)])


def ct(backend):
    m = Model(3, (Segment(0.5, 2.0, BERN), Segment(math.inf, 1.0, TWO)))
    return np.array([e.value for e in estimate_h(m, [1.0, 4.0], 2000, 1, threads=1,
                                                 backend=backend)])


def dt(backend):
    return np.array([e.value for e in estimate_H(BERN, 3, [6, 12], None, 2000, 1, switch=64,
                                                 threads=1, backend=backend)])


def products(backend):
    return _log_products(1.5, BERN, [500, 1000], 500, 1, 1, backend)


def downward(backend):
    t = solve_h(TWO, None, 200, backend=backend)
    return np.concatenate([t.lo, t.hi])


CASES = {"ct_populations": ct, "dt_populations": dt, "log_products": products,
         "downward": downward}


def best_of(fn, backend, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(backend)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _backend.compiled is None:
        raise SystemExit("compiled kernels not built; run `pip install -e . --no-build-isolation`")
    print(f"{'kernel':<16}{'compiled s':>12}{'pure s':>12}{'speedup':>10}  identical")
    for name, fn in CASES.items():
        tc, a = best_of(fn, "compiled", args.repeat)
        tp, b = best_of(fn, "pure", args.repeat)
        print(f"{name:<16}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}  {np.array_equal(a, b)}")


if __name__ == "__main__":
    main()
