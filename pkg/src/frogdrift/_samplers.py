"""Exact variate generators on top of the Philox stream state."""
import math

import numpy as np
from numba import njit

from .rng import next_double, next_open_double

# Largest n*(-log(1-q)) handled by one inversion pass; e^-600 is still normal.
_BINOM_CHUNK_LOG = 600.0


@njit(cache=True, nogil=True)
def exponential(st, rate):
    return -math.log(next_open_double(st)) / rate


@njit(cache=True, nogil=True)
def _poisson_inversion(st, mu):
    u = next_double(st)
    p = math.exp(-mu)
    k = 0
    while u > p:
        u -= p
        k += 1
        p *= mu / k
        if p == 0.0:
            break
    return k


@njit(cache=True, nogil=True)
def _poisson_ptrs(st, lam):
    # transformed rejection with squeeze (Hormann 1993), as used by numpy
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = next_double(st) - 0.5
        v = next_double(st)
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return np.int64(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)) <= (
            -lam + k * loglam - math.lgamma(k + 1.0)
        ):
            return np.int64(k)


@njit(cache=True, nogil=True)
def poisson(st, mu):
    if mu <= 0.0:
        return np.int64(0)
    if mu < 10.0:
        return np.int64(_poisson_inversion(st, mu))
    return _poisson_ptrs(st, mu)


@njit(cache=True, nogil=True)
def _binomial_inversion(st, n, q):
    # q <= 1/2 and n * -log(1-q) bounded so (1-q)^n does not underflow
    r = q / (1.0 - q)
    p = math.exp(n * math.log1p(-q))
    u = next_double(st)
    k = 0
    while u > p and k < n:
        u -= p
        p *= r * (n - k) / (k + 1)
        k += 1
    return k


@njit(cache=True, nogil=True)
def binomial(st, n, prob):
    """Bin(n, prob) by inversion on chunks of the trials."""
    if n <= 0 or prob <= 0.0:
        return np.int64(0)
    if prob >= 1.0:
        return np.int64(n)
    flip = prob > 0.5
    q = 1.0 - prob if flip else prob
    chunk = max(1, np.int64(_BINOM_CHUNK_LOG / -math.log1p(-q)))
    total = 0
    left = n
    while left > 0:
        m = min(left, chunk)
        total += _binomial_inversion(st, m, q)
        left -= m
    if flip:
        return np.int64(n - total)
    return np.int64(total)


@njit(cache=True, nogil=True)
def geometric_overshoot(st, log_rho):
    """G >= 0 with P(G >= k) = rho^k."""
    return np.int64(math.floor(math.log(next_open_double(st)) / log_rho))
