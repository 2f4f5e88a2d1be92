"""Discrete-time chains M (absorbed at 0) and N (restarting from 0).

M_0 = N_0 = 1, the step to index 1 is a Bernoulli(rho) thinning, and for
j >= 1 the next value is Bin(value, rho) + Poisson(rho f(j)).  M stays at 0
once there; N draws only the Poisson part from 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ._fkern import feval
from ._samplers import binomial, poisson
from .bdsim import MixtureLaw
from .criteria import Discrete, tau_j
from .intensity import IntensityFn
from .rng import RandomStream, STATE_SIZE, init_state

DEFAULT_CAP = 10**9
OK = 0
EXPLODED = 1


class ExplosionError(RuntimeError):
    """Chain value exceeded the hard cap."""


@njit(cache=True, nogil=True)
def _run(code, par, rho, J, absorbing, st, cap, out):
    """Fill ``out[0..J]`` with one path; returns the status code."""
    n = 1
    out[0] = 1
    for j in range(J):
        if n == 0 and absorbing:
            nxt = 0
        else:
            nxt = binomial(st, n, rho)
            if j >= 1:
                nxt += poisson(st, rho * feval(code, par, float(j)))
        n = nxt
        out[j + 1] = n
        if n > cap:
            return EXPLODED
    return OK


@njit(cache=True, nogil=True)
def _ensemble(code, par, rho, J, key0, r0, r1, cap, cps, final, status, k_count, first_zero, cp_vals):
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    for i in range(r1 - r0):
        init_state(st, key0, np.uint64(r0 + i), np.uint64(0), np.uint64(0), np.uint64(0))
        n = 1
        k = 0
        fz = -1
        ci = 0
        stat = OK
        for j in range(J):
            nxt = binomial(st, n, rho)
            if j >= 1:
                nxt += poisson(st, rho * feval(code, par, float(j)))
            n = nxt
            if n == 0:
                k += 1
                if fz < 0:
                    fz = j + 1
            while ci < cps.size and cps[ci] == j + 1:
                cp_vals[i, ci] = n
                ci += 1
            if n > cap:
                stat = EXPLODED
                break
        final[i] = n
        status[i] = stat
        k_count[i] = k
        first_zero[i] = fz


@dataclass
class ChainPath:
    values: np.ndarray
    params: Discrete
    absorbing: bool = False

    @property
    def final(self) -> int:
        return int(self.values[-1])


def _simulate(f, params, J, rng, absorbing, cap):
    if J < 1:
        raise ValueError("J must be >= 1")
    if J > f.resolution_limit:
        raise ValueError("J beyond the intensity's resolution limit")
    code, par = f.kernel_spec()
    out = np.empty(J + 1, dtype=np.int64)
    status = _run(code, par, params.rho, int(J), absorbing, rng.state(), cap, out)
    if status == EXPLODED:
        raise ExplosionError(f"chain value exceeded cap {cap} (replica {rng.replica})")
    return ChainPath(out, params, absorbing)


def simulate_M(f: IntensityFn, params: Discrete, J: int, rng: RandomStream,
               cap: int = DEFAULT_CAP) -> ChainPath:
    return _simulate(f, params, J, rng, True, cap)


def simulate_N(f: IntensityFn, params: Discrete, J: int, rng: RandomStream,
               cap: int = DEFAULT_CAP) -> ChainPath:
    """As :func:`simulate_M` but from 0 the chain jumps to Poisson(rho f(j))."""
    return _simulate(f, params, J, rng, False, cap)


def count_K(path: ChainPath) -> int:
    """Number of indices j >= 1 with value 0."""
    return int(np.count_nonzero(path.values[1:] == 0))


def exact_law_N(f: IntensityFn, params: Discrete, j: int) -> MixtureLaw:
    if j < 1:
        raise ValueError("j must be >= 1")
    return MixtureLaw(params.rho**j, tau_j(f, params, j))


@dataclass
class ChainEnsemble:
    """Per-replica outcomes of N, with M read off by coupling.

    ``final`` is M_J, ``final_n`` is N_J, ``absorption_index`` the first j
    with value 0 (-1 if none) and ``k_count`` is K on 1..J.
    """

    final: np.ndarray
    final_n: np.ndarray
    absorbed: np.ndarray
    absorption_index: np.ndarray
    k_count: np.ndarray
    checkpoints: np.ndarray
    checkpoint_values: np.ndarray
    checkpoint_values_free: np.ndarray
    status: np.ndarray


def run_ensemble(f: IntensityFn, params: Discrete, J: int, master_seed: int, r0: int, r1: int,
                 checkpoints=(), cap: int = DEFAULT_CAP) -> ChainEnsemble:
    if J < 1:
        raise ValueError("J must be >= 1")
    cps = np.asarray(sorted(int(c) for c in checkpoints), dtype=np.int64)
    if cps.size and (cps[0] < 1 or cps[-1] > J):
        raise ValueError("checkpoints must lie in 1..J")
    code, par = f.kernel_spec()
    m = r1 - r0
    final = np.empty(m, dtype=np.int64)
    status = np.empty(m, dtype=np.int64)
    k = np.empty(m, dtype=np.int64)
    fz = np.empty(m, dtype=np.int64)
    cp_n = np.zeros((m, cps.size), dtype=np.int64)
    _ensemble(code, par, params.rho, int(J), RandomStream(master_seed).key[0], r0, r1, cap, cps,
              final, status, k, fz, cp_n)
    absorbed = fz >= 0
    cp_m = np.where((fz[:, None] < 0) | (cps[None, :] < fz[:, None]), cp_n, 0)
    return ChainEnsemble(np.where(absorbed, 0, final), final, absorbed, fz, k, cps, cp_m, cp_n, status)

