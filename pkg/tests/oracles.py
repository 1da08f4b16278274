"""Independent reference computations used by the tests.

Nothing here imports from ``osv_aslr``: each helper recomputes its quantity
the slow, obvious way so the package code can be checked against it.
"""

import bisect

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def levene_bruteforce(groups, center="mean"):
    """W for Levene's test with explicit loops over every observation."""
    k = len(groups)
    big_n = sum(len(g) for g in groups)
    z = []
    for g in groups:
        if center == "mean":
            c = sum(g) / len(g)
        else:
            s = sorted(g)
            m = len(s) // 2
            c = s[m] if len(s) % 2 else (s[m - 1] + s[m]) / 2
        z.append([abs(y - c) for y in g])
    zbar_i = [sum(zi) / len(zi) for zi in z]
    zbar = sum(sum(zi) for zi in z) / big_n
    num = 0.0
    for zi, m in zip(z, zbar_i):
        num += len(zi) * (m - zbar) ** 2
    den = 0.0
    for zi, m in zip(z, zbar_i):
        for v in zi:
            den += (v - m) ** 2
    return (big_n - k) / (k - 1) * num / den


def f_tail_quadrature(x, d1, d2):
    """P(F > x) by numerically integrating the F density (arbitrary precision)."""
    a, b = mp.mpf(d1) / 2, mp.mpf(d2) / 2
    norm = 1 / mp.beta(a, b) * (mp.mpf(d1) / d2) ** a

    def pdf(u):
        return norm * u ** (a - 1) * (1 + mp.mpf(d1) * u / d2) ** (-(a + b))

    return float(mp.quad(pdf, [x, mp.inf]))


def t_quantile_root(p, df):
    """Student-t quantile by root finding on the CDF."""
    def cdf(t):
        x = df / (df + t * t)
        tail = mp.betainc(mp.mpf(df) / 2, mp.mpf(1) / 2, 0, x, regularized=True) / 2
        return 1 - tail if t >= 0 else tail

    return float(mp.findroot(lambda t: cdf(t) - p, 1.0))


def ks_sup_bruteforce(values, lo, hi):
    """sup_x |F_n(x) - F(x)| evaluated at both one-sided limits of every jump.

    The EDF is counted directly at each point, O(n^2); the supremum of a step
    function minus a continuous increasing one is attained at a jump.
    """
    n = len(values)
    best = 0.0
    for x in values:
        f = (x - lo) / (hi - lo)
        at = sum(1 for v in values if v <= x) / n
        below = sum(1 for v in values if v < x) / n
        best = max(best, abs(at - f), abs(below - f))
    return best


def ks_sup_grid(values, lo, hi, points):
    """sup over a uniform grid of ``points`` locations plus the interval ends."""
    n = len(values)
    s = sorted(values)
    best = 0.0
    for j in range(points + 1):
        x = lo + (hi - lo) * j / points
        f = j / points
        right = bisect.bisect_right(s, x) / n
        left = bisect.bisect_left(s, x) / n
        best = max(best, abs(right - f), abs(left - f))
    return best


def policy_lattice(bit_check, rnd_mask):
    """Sorted array of every value ``w & rnd_mask`` over words carrying all ``bit_check`` bits.

    Enumerates every assignment of the bits ``rnd_mask`` keeps; bits it
    discards cannot change the masked value.
    """
    free = [b for b in range(64) if rnd_mask >> b & 1]
    combos = np.arange(1 << len(free), dtype=np.uint64)
    words = np.zeros_like(combos)
    for i, b in enumerate(free):
        words |= ((combos >> np.uint64(i)) & np.uint64(1)) << np.uint64(b)
    keep = (words & np.uint64(bit_check)) == np.uint64(bit_check)
    return np.unique(words[keep] & np.uint64(rnd_mask))
