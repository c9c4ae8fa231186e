"""Reference values for the formula reproducibility test, computed at 50 digits.

Run with `python3 reference_values.py`; the printed table is pasted into
`tests/acceptance.rs`.
"""
from mpmath import mp, mpf, e, exp, log, ceil

mp.dps = 50


def epsilon(n, k, t, delta, c, s_x, s_i):
    s = max(int(ceil(mpf(s_x) / k)), s_i)
    if s == 0:
        return mpf(1)
    v = (c * delta) ** s * (mpf(s) / n) ** (mpf(t - 2) / 2 * s)
    if s_x > 0:
        v *= (mpf(s) / s_x) ** (mpf(s_x) / 2)
    return v


def count_bound(c, n, k, t, a, l):
    half = mpf(t * l + a) / 2
    lp = mpf(1) if l == 0 and half == 0 else (mpf(0) if l == 0 else mpf(l) ** (half - l))
    return mpf(c) ** l * mpf(n) ** (k * l - half) * lp


def tail(k, tau):
    return exp(-(mpf(k) / (2 * e)) * mpf(tau) ** (mpf(2) / k))


def nu_fit(n, k, t, delta, d_x, d_i, b=1, c=1):
    lo = max(d_i - 2 * b, 1)
    nu_min = mpf("-inf")
    for s_x in range(d_x + 1):
        base = log(epsilon(n, k, t, delta, c, s_x, 1))
        for u in range(lo, d_i + 1):
            lhs = b * log(2) + log(epsilon(n, k, t, delta, c, s_x, u))
            assert base < 0, "point outside the nondegenerate regime"
            nu_min = max(nu_min, 1 - lhs / base)
    assert nu_min < 1
    return max(nu_min, mpf(0))


def nonneg(n, k, t, delta, d_x, d_i, nu=None):
    if nu is None:
        nu = nu_fit(n, k, t, delta, d_x, d_i)
    total = mpf(0)
    for s in range(1, d_x + 1):
        eps = epsilon(n, k, t, delta, 1, s, 1)
        total += exp(-(mpf(s) / (2 * e)) * eps ** (-(2 - 2 * nu) / s))
    return total, nu


EPS = [(1e4, 3, 3, 2.0, 1.0, 3, 1), (1e3, 3, 3, 2.0, 1.0, 7, 2), (5e4, 4, 3, 1.5, 2.0, 5, 3),
       (1e6, 3, 4, 3.0, 0.5, 2, 4), (200, 5, 5, 4.0, 1.0, 11, 1)]
COUNT = [(1.0, 6, 3, 3, 2, 2), (2.5, 10, 3, 3, 0, 3), (1.7, 20, 4, 3, 5, 4), (0.8, 9, 3, 2, 1, 1), (3.0, 50, 5, 4, 7, 6)]
TAIL = [(1, 3.0), (2, 6.0), (3, 25.0), (4, 60.0), (5, 200.0)]
NONNEG = [(1e4, 3, 3, 2.0, 10, 11), (1e5, 3, 3, 2.0, 6, 8), (1e6, 3, 3, 3.0, 12, 12),
          (5e4, 4, 3, 1.5, 4, 6), (8000, 3, 3, 2.5, 4, 6)]
NONNEG_AT_NU = [(16, 3, 3, 5.0, 2, 3, 0.5), (100, 3, 3, 2.0, 3, 4, 0.3), (1e3, 3, 3, 2.0, 4, 6, 0.3),
                (1e4, 4, 4, 3.0, 5, 6, 0.8), (40, 3, 3, 5.0, 2, 2, 0.1)]

for p in EPS:
    n, k, t, d, c, sx, si = p
    print("eps", p, mp.nstr(epsilon(mpf(n), k, t, mpf(d), mpf(c), sx, si), 17))
for p in COUNT:
    print("count", p, mp.nstr(count_bound(*p), 17))
for p in TAIL:
    print("tail", p, mp.nstr(tail(*p), 17))
for p in NONNEG:
    n, k, t, d, dx, di = p
    v, nu = nonneg(mpf(n), k, t, mpf(d), dx, di)
    print("nonneg", p, mp.nstr(v, 17), "nu", mp.nstr(nu, 17))
for p in NONNEG_AT_NU:
    n, k, t, d, dx, di, nu = p
    v, _ = nonneg(mpf(n), k, t, mpf(d), dx, di, mpf(nu))
    print("nonneg_at_nu", p, mp.nstr(v, 17))
