"""numba evaluation of lowered intensities.

``p[0:3]`` hold an affine wrapper ``(a, b, c)`` meaning ``c * base(a x + b)``;
family parameters follow from ``p[3]``.
"""
import math

import numpy as np
from numba import njit

CONST = 0
LOG = 1
LOGLOG = 2
EX41 = 3
EX42 = 4
TABLE = 5
LINEAR = 6


@njit(cache=True)
def _plateau(x):
    if x < 2.0:
        return False
    base = 2.0
    while base * 2.0 <= x:
        base *= 2.0
    return x < base + 1.0


@njit(cache=True)
def _table_eval(p, x):
    n = np.int64(p[3])
    bp = p[4:4 + n]
    vs = p[4 + n:4 + 2 * n]
    if x <= bp[0]:
        return vs[0]
    if x >= bp[n - 1]:
        return vs[n - 1]
    i = np.searchsorted(bp, x, side="right") - 1
    w = (x - bp[i]) / (bp[i + 1] - bp[i])
    return vs[i] + w * (vs[i + 1] - vs[i])


@njit(cache=True)
def _base(code, p, y):
    if code == CONST:
        return p[3]
    if code == LOG:
        return p[3] * math.log(y + p[4])
    if code == LOGLOG:
        return p[3] * math.log1p(y) + p[4] * math.log(math.log(y + math.e))
    if code == EX41:
        return 1.0 if _plateau(y) else y
    if code == EX42:
        j = np.int64(y)
        if j >= 1 and (j & (j - 1)) == 0:
            return 1.0
        return float(j)
    if code == TABLE:
        return _table_eval(p, y)
    if code == LINEAR:
        return p[3] * y
    return math.nan


@njit(cache=True)
def feval(code, p, x):
    return p[2] * _base(code, p, p[0] * x + p[1])


@njit(cache=True)
def _base_sup(code, p, lo, hi):
    """sup of the base family over [lo, hi]."""
    if code == EX41:
        s = max(_base(code, p, lo), _base(code, p, hi))
        # left limits at plateau starts 2^n in (lo, hi] equal 2^n
        b = 2.0
        while b <= hi:
            if b > lo:
                s = max(s, b)
            b *= 2.0
        return s
    if code == TABLE:
        n = np.int64(p[3])
        s = max(_table_eval(p, lo), _table_eval(p, hi))
        for i in range(n):
            b = p[4 + i]
            if lo < b < hi:
                s = max(s, p[4 + n + i])
        return s
    # remaining families are nondecreasing
    return _base(code, p, hi)


@njit(cache=True)
def fsup(code, p, lo, hi):
    return p[2] * _base_sup(code, p, p[0] * lo + p[1], p[0] * hi + p[1])
