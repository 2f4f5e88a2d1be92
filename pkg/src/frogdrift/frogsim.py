"""Direct simulation of the frog model with leftward drift.

Sleepers form a Poisson field of intensity f on the positive half-line
(continuous) or Poisson(f(j)) piles on sites j >= 1 (discrete).  Each woken
frog only matters through how far right it ever gets: an Exp(2 lam) overshoot
beyond its start, or a geometric G with P(G >= k) = rho^k.

Sleepers are thinned from a unit-rate planar Poisson process, one column or
site per sub-stream, so raising f only ever adds frogs (monotone coupling)
and the sweep can stop without drawing anything beyond the frontier.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._fkern import feval, fsup
from ._samplers import exponential, geometric_overshoot, poisson
from .criteria import Continuous, Discrete, ModelParams, left_truncation
from .intensity import IntensityFn
from .rng import RandomStream, STATE_SIZE, init_state, next_double, next_open_double

_INITIAL = np.uint64(1)
_COLUMN = np.uint64(2)
_LEFT = np.uint64(3)
_Z = np.uint64(0)


@njit(cache=True, nogil=True)
def _grow(a, n):
    if n < a.size:
        return a
    b = np.empty(2 * a.size + 16, dtype=a.dtype)
    b[: a.size] = a
    return b


@njit(cache=True, nogil=True)
def _column(code, par, k, st, xs, es):
    """Sleepers of column [k, k+1) as (position, Exp(1) overshoot), sorted."""
    ceiling = fsup(code, par, float(k), float(k + 1))
    m = 0
    h = 0.0
    while True:
        h += exponential(st, 1.0)
        if h > ceiling:
            break
        x = k + next_double(st)
        e = -math.log(next_open_double(st))
        if h <= feval(code, par, x):
            xs = _grow(xs, m)
            es = _grow(es, m)
            xs[m] = x
            es[m] = e
            m += 1
    order = np.argsort(xs[:m], kind="mergesort")
    return xs[:m][order].copy(), es[:m][order].copy()


@njit(cache=True, nogil=True)
def _sweep_continuous(code, par, lam, T, key0, key1, keep_sleepers):
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    init_state(st, key0, key1, _INITIAL, _Z, _Z)
    r0 = exponential(st, 2.0 * lam)
    frontier = r0
    starts = np.empty(16)
    reaches = np.empty(16)
    sleepers = np.empty(16)
    n_act = 0
    n_sl = 0
    xs = np.empty(16)
    es = np.empty(16)
    k = 0
    stopped = False
    while k < T and k <= frontier and not stopped:
        init_state(st, key0, key1, _COLUMN, np.uint64(k), _Z)
        cx, ce = _column(code, par, k, st, xs, es)
        for i in range(cx.size):
            x = cx[i]
            if x > T:
                stopped = True
                break
            if keep_sleepers:
                sleepers = _grow(sleepers, n_sl)
                sleepers[n_sl] = x
                n_sl += 1
            if x > frontier:
                stopped = True
                if not keep_sleepers:
                    break
                continue
            starts = _grow(starts, n_act)
            reaches = _grow(reaches, n_act)
            starts[n_act] = x
            reaches[n_act] = x + ce[i] / (2.0 * lam)
            frontier = max(frontier, reaches[n_act])
            n_act += 1
        k += 1
    return r0, starts[:n_act].copy(), reaches[:n_act].copy(), frontier, sleepers[:n_sl].copy()


@njit(cache=True, nogil=True)
def _sweep_discrete(code, par, log_rho, J, key0, key1):
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    init_state(st, key0, key1, _INITIAL, _Z, _Z)
    g0 = geometric_overshoot(st, log_rho)
    frontier = g0
    starts = np.empty(16, dtype=np.int64)
    reaches = np.empty(16, dtype=np.int64)
    counts = np.zeros(J, dtype=np.int64)
    n_act = 0
    last = 0
    j = 1
    while j <= J and j <= frontier:
        init_state(st, key0, key1, _COLUMN, np.uint64(j), _Z)
        fj = feval(code, par, float(j))
        h = exponential(st, 1.0)
        while h <= fj:
            g = geometric_overshoot(st, log_rho)
            starts = _grow(starts, n_act)
            reaches = _grow(reaches, n_act)
            starts[n_act] = j
            reaches[n_act] = j + g
            frontier = max(frontier, j + g)
            n_act += 1
            counts[j - 1] += 1
            h += exponential(st, 1.0)
        last = j
        j += 1
    return g0, starts[:n_act].copy(), reaches[:n_act].copy(), frontier, counts[:last].copy()


@njit(cache=True, nogil=True)
def _section_counts_continuous(r0, starts, reaches, cps, out):
    for c in range(cps.size):
        t = cps[c]
        n = 1 if r0 > t else 0
        for i in range(starts.size):
            if starts[i] <= t and reaches[i] > t:
                n += 1
        out[c] = n


@njit(cache=True, nogil=True)
def _section_counts_discrete(g0, starts, reaches, cps, out):
    for c in range(cps.size):
        j = cps[c]
        n = 1 if g0 >= j else 0
        for i in range(starts.size):
            if starts[i] < j and reaches[i] >= j:
                n += 1
        out[c] = n


@njit(cache=True, nogil=True)
def _ensemble_continuous(code, par, lam, T, key0, r0, r1, cps, activated, frontier, cp_vals):
    for i in range(r1 - r0):
        res = _sweep_continuous(code, par, lam, T, key0, np.uint64(r0 + i), False)
        activated[i] = res[1].size
        frontier[i] = res[3]
        _section_counts_continuous(res[0], res[1], res[2], cps, cp_vals[i])


@njit(cache=True, nogil=True)
def _ensemble_discrete(code, par, log_rho, J, key0, r0, r1, cps, activated, frontier, cp_vals):
    for i in range(r1 - r0):
        res = _sweep_discrete(code, par, log_rho, J, key0, np.uint64(r0 + i))
        activated[i] = res[1].size
        frontier[i] = res[3]
        _section_counts_discrete(res[0], res[1], res[2], cps, cp_vals[i])


# ---------------------------------------------------------------------------
# public API


@dataclass
class FrogConfigOutcome:
    """One realisation of the sweep.

    ``sleepers`` holds sorted positions (continuous) or per-site counts for
    sites 1..len (discrete), only as far as the sweep materialised them.
    ``starts``/``reaches`` describe the woken frogs in wake order; the frog
    initially at the origin is described by ``initial_reach`` alone.
    """

    sleepers: np.ndarray
    starts: np.ndarray
    reaches: np.ndarray
    initial_reach: float
    frontier: float
    checkpoints: np.ndarray
    section_counts: np.ndarray

    @property
    def activated_count(self) -> int:
        return int(self.starts.size)

    @property
    def returns_to_origin(self) -> int:
        # every woken frog drifts back through the origin; the initial frog is not counted
        return self.activated_count


def sample_sleepers_continuous(f: IntensityFn, T: float, rng: RandomStream) -> np.ndarray:
    """Sorted Poisson points of intensity f on (0, T], thinned column by column."""
    if not T > 0:
        raise ValueError("T must be positive")
    code, par = f.kernel_spec()
    k0, k1 = rng.key
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    xs = np.empty(16)
    out = []
    for k in range(int(math.ceil(T))):
        init_state(st, k0, k1, _COLUMN, np.uint64(k), _Z)
        cx, _ = _column(code, par, k, st, xs, xs.copy())
        out.append(cx[cx <= T])
    return np.concatenate(out) if out else np.empty(0)


def sample_excursion_continuous(lam: float, rng: RandomStream, size: int | None = None):
    """Rightmost displacement of a frog with drift lam: Exp(rate 2 lam)."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    u = rng.generator().random(size)
    return -np.log1p(-u) / (2.0 * lam)


def simulate_frogs_continuous(f: IntensityFn, lam: float, T: float, checkpoints,
                              rng: RandomStream) -> FrogConfigOutcome:
    if not T > 0:
        raise ValueError("T must be positive")
    cps = np.asarray(sorted(checkpoints), dtype=float)
    if cps.size and (cps[0] < 0 or cps[-1] > T):
        raise ValueError("checkpoints must lie in [0, T]")
    code, par = f.kernel_spec()
    k0, k1 = rng.key
    r0, starts, reaches, frontier, sleepers = _sweep_continuous(code, par, float(lam), float(T), k0, k1, True)
    counts = np.empty(cps.size, dtype=np.int64)
    _section_counts_continuous(r0, starts, reaches, cps, counts)
    return FrogConfigOutcome(sleepers, starts, reaches, r0, frontier, cps, counts)


def simulate_frogs_discrete(f: IntensityFn, params: Discrete, J: int, rng: RandomStream,
                            checkpoints=None) -> FrogConfigOutcome:
    """Sweep over sites 1..J; section counts M_j default to every j."""
    if J < 1:
        raise ValueError("J must be >= 1")
    cps = np.arange(1, J + 1) if checkpoints is None else np.asarray(sorted(checkpoints), dtype=np.int64)
    code, par = f.kernel_spec()
    k0, k1 = rng.key
    g0, starts, reaches, frontier, counts = _sweep_discrete(code, par, math.log(params.rho), int(J), k0, k1)
    sec = np.empty(cps.size, dtype=np.int64)
    _section_counts_discrete(g0, starts, reaches, cps, sec)
    return FrogConfigOutcome(counts, starts, reaches, float(g0), float(frontier), cps, sec)


@dataclass
class FrogEnsemble:
    activated: np.ndarray
    frontier: np.ndarray
    checkpoints: np.ndarray
    section_counts: np.ndarray


def run_ensemble(f: IntensityFn, model: ModelParams, horizon: float, master_seed: int,
                 r0: int, r1: int, checkpoints=()) -> FrogEnsemble:
    code, par = f.kernel_spec()
    key0 = RandomStream(master_seed).key[0]
    m = r1 - r0
    act = np.empty(m, dtype=np.int64)
    front = np.empty(m)
    if isinstance(model, Continuous):
        cps = np.asarray(sorted(checkpoints), dtype=float)
        vals = np.zeros((m, cps.size), dtype=np.int64)
        _ensemble_continuous(code, par, model.lam, float(horizon), key0, r0, r1, cps, act, front, vals)
    else:
        cps = np.asarray(sorted(checkpoints), dtype=np.int64)
        vals = np.zeros((m, cps.size), dtype=np.int64)
        _ensemble_discrete(code, par, math.log(model.rho), int(horizon), key0, r0, r1, cps, act, front, vals)
    return FrogEnsemble(act, front, cps, vals)


def frontier_sweep(initial_reach: float, starts, reaches) -> tuple[np.ndarray, float]:
    """Wake frogs in order of position; returns (woken mask, final frontier).

    A frog wakes iff its start is at most the furthest point reached by the
    frogs woken before it (the initial frog included).
    """
    starts = np.asarray(starts, dtype=float)
    reaches = np.asarray(reaches, dtype=float)
    order = np.argsort(starts, kind="stable")
    woken = np.zeros(starts.size, dtype=bool)
    frontier = float(initial_reach)
    for i in order:
        if starts[i] > frontier:
            break
        woken[i] = True
        frontier = max(frontier, float(reaches[i]))
    return woken, frontier


# ---------------------------------------------------------------------------
# frogs started left of the origin


@njit(cache=True, nogil=True)
def _left_continuous(code, par, lam, T, key0, r0, r1, out):
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    xs = np.empty(16)
    es = np.empty(16)
    ncol = np.int64(math.ceil(T))
    for i in range(r1 - r0):
        hits = 0
        for k in range(ncol):
            init_state(st, key0, np.uint64(r0 + i), _LEFT, np.uint64(k), _Z)
            cx, ce = _column(code, par, k, st, xs, es)
            for m in range(cx.size):
                # overshoot beyond start must cover the distance x to the origin
                if cx[m] < T and ce[m] >= 2.0 * lam * cx[m]:
                    hits += 1
        out[i] = hits


@njit(cache=True, nogil=True)
def _left_discrete(code, par, log_rho, J, key0, r0, r1, out):
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    for i in range(r1 - r0):
        hits = 0
        for j in range(1, J + 1):
            init_state(st, key0, np.uint64(r0 + i), _LEFT, np.uint64(j), _Z)
            n = poisson(st, feval(code, par, float(j)))
            for _ in range(n):
                if geometric_overshoot(st, log_rho) >= j:
                    hits += 1
        out[i] = hits


def left_hitters_ensemble(f_left: IntensityFn, model: ModelParams, master_seed: int,
                          r0: int, r1: int, eps: float = 1e-6) -> np.ndarray:
    """Hitter counts for replicas ``r0 .. r1-1``.

    ``f_left`` is mirrored: ``f_left(x)`` is the intensity at ``-x``.  The
    field is cut where the remaining mean number of hitters drops below eps.
    """
    T = left_truncation(f_left, model, eps)
    code, par = f_left.kernel_spec()
    key0 = RandomStream(master_seed).key[0]
    out = np.empty(r1 - r0, dtype=np.int64)
    if isinstance(model, Continuous):
        _left_continuous(code, par, model.lam, float(T), key0, r0, r1, out)
    else:
        _left_discrete(code, par, math.log(model.rho), int(T), key0, r0, r1, out)
    return out


def two_sided_left_hitters(f_left: IntensityFn, model: ModelParams, rng: RandomStream,
                           eps: float = 1e-6) -> int:
    """Number of frogs from the negative half-line that ever hit the origin."""
    return int(left_hitters_ensemble(f_left, model, rng.master_seed, rng.replica, rng.replica + 1, eps)[0])
