import numpy as np
from numba import njit

from frogdrift._samplers import binomial, geometric_overshoot, poisson
from frogdrift.rng import next_double, next_u64


@njit(cache=True)
def draw_u64(st, n):
    out = np.empty(n, dtype=np.uint64)
    for i in range(n):
        out[i] = next_u64(st)
    return out


@njit(cache=True)
def draw_double(st, n):
    out = np.empty(n)
    for i in range(n):
        out[i] = next_double(st)
    return out


@njit(cache=True)
def draw_poisson(st, mu, n):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = poisson(st, mu)
    return out


@njit(cache=True)
def draw_binomial(st, m, q, n):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = binomial(st, m, q)
    return out


@njit(cache=True)
def draw_geometric(st, log_rho, n):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = geometric_overshoot(st, log_rho)
    return out


def tv_to_pmf(samples, pmf):
    """TV between sample frequencies and a pmf on 0..len(pmf)-1 (rest lumped)."""
    counts = np.bincount(samples, minlength=len(pmf)).astype(float) / samples.size
    head = np.abs(counts[: len(pmf)] - pmf).sum()
    tail = abs(counts[len(pmf):].sum() - max(0.0, 1 - pmf.sum()))
    return 0.5 * (head + tail)
