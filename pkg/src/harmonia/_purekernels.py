"""Pure-Python fallback for :mod:`harmonia._kernels`.

Same signatures, same draw order, same floating-point operations; slow.
"""

import math

import numpy as np

BACKEND = "pure"


def _stream(seed, r):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(r,))))


def _search(cdf, n, u):
    j = 0
    while j < n - 1 and not (u < cdf[j]):
        j += 1
    return j


def ct_populations(seed, rep_start, rep_stop, k0, seg_ends, seg_cdf, seg_values,
                   seg_natoms, t_grid, cap):
    R = rep_stop - rep_start
    G = len(t_grid)
    out = np.zeros((R, G), dtype=np.int64)
    cens = np.zeros(R, dtype=np.uint8)
    ends = [float(e) for e in seg_ends]
    cdfs = [list(map(float, row)) for row in seg_cdf]
    vals = [list(map(int, row)) for row in seg_values]
    nat = [int(n) for n in seg_natoms]
    grid = [float(t) for t in t_grid]
    cap = int(cap)
    for i in range(R):
        rng = _stream(seed, rep_start + i)
        exp, unif = rng.standard_exponential, rng.random
        row = out[i]
        z = int(k0)
        t = 0.0
        seg = 0
        g = 0
        while g < G:
            tn = t + exp() / float(z)
            if tn >= ends[seg]:
                while g < G and grid[g] < ends[seg]:
                    row[g] = z
                    g += 1
                t = ends[seg]
                seg += 1
                continue
            while g < G and grid[g] < tn:
                row[g] = z
                g += 1
            if g == G:
                break
            u = unif()
            inc = vals[seg][_search(cdfs[seg], nat[seg], u)]
            if z > cap - inc:
                cens[i] = 1
                while g < G:
                    row[g] = z
                    g += 1
                break
            z += inc
            t = tn
    return out, cens


def dt_populations(seed, rep_start, rep_stop, k0, n_grid, values, cdf, probs, switch, cap):
    R = rep_stop - rep_start
    G = len(n_grid)
    A = len(values)
    out = np.zeros((R, G), dtype=np.int64)
    ovf = np.zeros(R, dtype=np.uint8)
    ng = [int(n) for n in n_grid]
    vals = [int(v) for v in values]
    cdfl = [float(c) for c in cdf]
    pvals = np.ascontiguousarray(probs, dtype=np.float64)
    switch, cap = int(switch), int(cap)
    for i in range(R):
        rng = _stream(seed, rep_start + i)
        unif = rng.random
        row = out[i]
        Z = int(k0)
        n = 0
        g = 0
        while g < G and ng[g] == 0:
            row[g] = Z
            g += 1
        while g < G:
            inc = 0
            bad = False
            room = cap - Z
            if Z <= switch:
                for _ in range(Z):
                    inc += vals[_search(cdfl, A, unif())]
                if inc > room:
                    bad = True
            else:
                counts = rng.multinomial(Z, pvals)
                for a in range(A):
                    c = int(counts[a])
                    if vals[a] == 0 or c == 0:
                        continue
                    if c > (room - inc) // vals[a]:
                        bad = True
                        break
                    inc += c * vals[a]
            if bad:
                ovf[i] = 1
                while g < G:
                    row[g] = Z
                    g += 1
                break
            Z += inc
            n += 1
            while g < G and ng[g] == n:
                row[g] = Z
                g += 1
    return out, ovf


def log_products(seed, rep_start, rep_stop, x, mean, values, cdf, marks):
    R = rep_stop - rep_start
    G = len(marks)
    A = len(values)
    out = np.zeros((R, G), dtype=np.float64)
    vals = [int(v) for v in values]
    cdfl = [float(c) for c in cdf]
    mk = [int(m) for m in marks]
    x, mean = float(x), float(mean)
    log1p = math.log1p
    for i in range(R):
        rng = _stream(seed, rep_start + i)
        unif = rng.random
        row = out[i]
        S = 0
        acc = log1p(mean / x)
        n = 0
        g = 0
        while g < G and mk[g] == 0:
            row[g] = acc
            g += 1
        while g < G:
            S += vals[_search(cdfl, A, unif())]
            n += 1
            acc += log1p(mean / (x + float(S)))
            while g < G and mk[g] == n:
                row[g] = acc
                g += 1
    return out


def downward(lo, hi, k_stop, k_start, steps, weights, p0, mean, m1, m2):
    st = [int(s) for s in steps]
    w = [float(x) for x in weights]
    A = len(st)
    k = k_start - 1
    while k >= k_stop:
        kk = float(k)
        sl = 0.0
        sh = 0.0
        for a in range(A):
            sl += w[a] * lo[k + st[a]]
            sh += w[a] * hi[k + st[a]]
        den = kk - mean - kk * p0
        sl = kk * sl / den
        sh = kk * sh / den
        floor_ = 1.0 / (kk - m1)
        if floor_ < 1.0 / kk:
            floor_ = 1.0 / kk
        if sl < floor_:
            sl = floor_
        if sh < floor_:
            sh = floor_
        if kk > m2:
            ceil_ = 1.0 / (kk - m2)
            if sh > ceil_:
                sh = ceil_
            if sl > ceil_:
                sl = ceil_
        if sh < sl:
            sh = sl
        lo[k] = sl
        hi[k] = sh
        k -= 1
