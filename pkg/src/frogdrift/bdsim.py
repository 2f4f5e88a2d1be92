"""Birth-death processes with time-varying birth rate f(t) and death rate n.

Y starts at 1 and is never absorbed; X is the same process stopped at 0.
Time is in the drift-1/2 normalisation; rescale f first for other drifts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import stats

from ._fkern import feval, fsup
from ._samplers import exponential
from .criteria import lambda_t
from .intensity import IntensityFn
from .rng import RandomStream, init_state, next_double, STATE_SIZE

DEFAULT_CAP = 10**6
DEFAULT_WINDOW = 1.0
MIN_WINDOW = 2.0**-30

OK = 0
EXPLODED = 1
OVERFLOW = 2


class ExplosionError(RuntimeError):
    """State exceeded the hard cap."""


# ---------------------------------------------------------------------------
# kernel


@njit(cache=True, nogil=True)
def _run(code, par, T, absorbing, st, cap, w0, ev_t, ev_v, record, cps, cp_out):
    """Simulate one path on [0, T].

    Returns (final, status, n_events, v_count, first_zero_time).  Checkpoint
    values are written to ``cp_out``; events to ``ev_t``/``ev_v`` when
    ``record`` is set.
    """
    n = 1
    s = 0.0
    w = w0
    n_ev = 0
    v = 0
    first_zero = math.inf
    ci = 0
    tried = 0
    accepted = 0
    status = OK
    while s < T:
        if absorbing and n == 0:
            break
        hi = min(s + w, T)
        fmax = fsup(code, par, s, hi)
        maj = n + fmax
        if maj <= 0.0:
            s = hi
            continue
        t = s + exponential(st, maj)
        if t > hi:
            s = hi
            continue
        u = next_double(st) * maj
        tried += 1
        if u < n:
            new = n - 1
        elif u < n + feval(code, par, t):
            new = n + 1
        else:
            s = t
            if tried >= 20 and accepted * 10 < tried and w > MIN_WINDOW:
                w *= 0.5
                tried = 0
                accepted = 0
            continue
        accepted += 1
        while ci < cps.size and cps[ci] < t:
            cp_out[ci] = n
            ci += 1
        if new == 1 and n == 0:
            v += 1
        if new == 0 and first_zero == math.inf:
            first_zero = t
        n = new
        s = t
        if record:
            if n_ev >= ev_t.size:
                status = OVERFLOW
                break
            ev_t[n_ev] = t
            ev_v[n_ev] = n
        n_ev += 1
        if n > cap:
            status = EXPLODED
            break
    while ci < cps.size:
        cp_out[ci] = n
        ci += 1
    return n, status, n_ev, v, first_zero


@njit(cache=True, nogil=True)
def _ensemble(code, par, T, absorbing, key0, r0, r1, cap, w0, cps,
              final, status, v_count, first_zero, cp_vals):
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    dummy_t = np.empty(0)
    dummy_v = np.empty(0, dtype=np.int64)
    for i in range(r1 - r0):
        init_state(st, key0, np.uint64(r0 + i), np.uint64(0), np.uint64(0), np.uint64(0))
        res = _run(code, par, T, absorbing, st, cap, w0, dummy_t, dummy_v, False, cps, cp_vals[i])
        final[i] = res[0]
        status[i] = res[1]
        v_count[i] = res[3]
        first_zero[i] = res[4]


# ---------------------------------------------------------------------------
# paths


@dataclass
class JumpPath:
    """Jump times and post-jump values; the path starts at value 1 at time 0."""

    times: np.ndarray
    values: np.ndarray
    horizon: float
    absorbing: bool = False

    @property
    def events(self) -> list[tuple[float, int]]:
        return list(zip(self.times.tolist(), self.values.tolist()))

    @property
    def final(self) -> int:
        return int(self.values[-1]) if self.values.size else 1

    def value_at(self, t: float) -> int:
        i = np.searchsorted(self.times, t, side="right")
        return int(self.values[i - 1]) if i > 0 else 1


def _check_horizon(f: IntensityFn, T: float) -> None:
    if not (T > 0 and math.isfinite(T)):
        raise ValueError("horizon must be positive and finite")
    if T > f.resolution_limit:
        raise ValueError("horizon beyond the intensity's resolution limit")


def _simulate(f, T, rng, absorbing, cap, window):
    _check_horizon(f, T)
    code, par = f.kernel_spec()
    size = 256
    cps = np.empty(0)
    cp_out = np.empty(0, dtype=np.int64)
    while True:
        ev_t = np.empty(size)
        ev_v = np.empty(size, dtype=np.int64)
        final, status, n_ev, _, _ = _run(
            code, par, float(T), absorbing, rng.state(), cap, window, ev_t, ev_v, True, cps, cp_out
        )
        if status == OVERFLOW:
            size *= 4
            continue
        if status == EXPLODED:
            raise ExplosionError(f"state exceeded cap {cap} (replica {rng.replica})")
        return JumpPath(ev_t[:n_ev].copy(), ev_v[:n_ev].copy(), float(T), absorbing)


def simulate_Y(f: IntensityFn, T: float, rng: RandomStream,
               cap: int = DEFAULT_CAP, window: float = DEFAULT_WINDOW) -> JumpPath:
    """Exact path of Y on [0, T] by thinning against window suprema of f."""
    return _simulate(f, T, rng, False, cap, window)


def simulate_X(f: IntensityFn, T: float, rng: RandomStream,
               cap: int = DEFAULT_CAP, window: float = DEFAULT_WINDOW) -> JumpPath:
    """As :func:`simulate_Y`, stopped on reaching 0.

    Driven by the same stream, X and Y agree event for event up to X's death.
    """
    return _simulate(f, T, rng, True, cap, window)


def count_V(path: JumpPath) -> int:
    """Number of jumps from 0 up to 1."""
    prev = np.concatenate(([1], path.values[:-1]))
    return int(np.count_nonzero((prev == 0) & (path.values == 1)))


@dataclass
class BDEnsemble:
    """Per-replica outcomes of Y, with X read off by coupling.

    ``absorbed`` and ``absorption_time`` refer to the first zero (X's death);
    ``final`` is X at the horizon, ``final_y`` is Y at the horizon.
    """

    final: np.ndarray
    final_y: np.ndarray
    absorbed: np.ndarray
    absorption_time: np.ndarray
    v_count: np.ndarray
    checkpoints: np.ndarray
    checkpoint_values: np.ndarray
    checkpoint_values_y: np.ndarray
    status: np.ndarray


def run_ensemble(f: IntensityFn, T: float, master_seed: int, r0: int, r1: int,
                 checkpoints=(), absorbing: bool = False,
                 cap: int = DEFAULT_CAP, window: float = DEFAULT_WINDOW) -> BDEnsemble:
    """Replicas ``r0 .. r1-1``; each uses stream (master_seed, replica).

    With ``absorbing`` the runs stop at 0, so V and Y are not observed (V is
    reported 0 and ``checkpoint_values_y`` equals ``checkpoint_values``).
    """
    _check_horizon(f, T)
    cps = np.asarray(sorted(checkpoints), dtype=float)
    if cps.size and (cps[0] < 0 or cps[-1] > T):
        raise ValueError("checkpoints must lie in [0, T]")
    code, par = f.kernel_spec()
    m = r1 - r0
    final = np.empty(m, dtype=np.int64)
    status = np.empty(m, dtype=np.int64)
    v = np.empty(m, dtype=np.int64)
    fz = np.empty(m)
    cp_vals = np.zeros((m, cps.size), dtype=np.int64)
    rs = RandomStream(master_seed, r0)
    _ensemble(code, par, float(T), absorbing, rs.key[0], r0, r1, cap, window, cps,
              final, status, v, fz, cp_vals)
    absorbed = np.isfinite(fz)
    final_x = np.where(absorbed, 0, final)
    cp_x = np.where(cps[None, :] < fz[:, None], cp_vals, 0)
    return BDEnsemble(final_x, final, absorbed, fz, v, cps, cp_x, cp_vals, status)


# ---------------------------------------------------------------------------
# exact law


@dataclass(frozen=True)
class MixtureLaw:
    """Law of B + P with B ~ Bernoulli(q), P ~ Poisson(mu) independent."""

    bernoulli_q: float
    poisson_mean: float
    mass: float = 1.0 - 1e-12

    def __post_init__(self):
        if not 0.0 <= self.bernoulli_q <= 1.0:
            raise ValueError("bernoulli_q must lie in [0, 1]")
        if not (self.poisson_mean >= 0 and math.isfinite(self.poisson_mean)):
            raise ValueError("poisson_mean must be finite and >= 0")

    def pmf(self, k):
        k = np.asarray(k)
        q, mu = self.bernoulli_q, self.poisson_mean
        return (1.0 - q) * stats.poisson.pmf(k, mu) + q * stats.poisson.pmf(k - 1, mu)

    def table(self) -> np.ndarray:
        """pmf on 0..K with K the first point where the mass reaches ``mass``."""
        mu = self.poisson_mean
        hi = int(mu + 12.0 * math.sqrt(mu) + 40)
        while True:
            p = self.pmf(np.arange(hi + 1))
            if p.sum() >= self.mass:
                c = np.cumsum(p)
                return p[: int(np.searchsorted(c, self.mass)) + 1]
            hi *= 2

    @property
    def mean(self) -> float:
        return self.bernoulli_q + self.poisson_mean

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        return gen.binomial(1, self.bernoulli_q, size) + gen.poisson(self.poisson_mean, size)


def exact_law_Y(f: IntensityFn, t: float, rel_tol: float = 1e-10) -> MixtureLaw:
    if t < 0:
        raise ValueError("t must be >= 0")
    return MixtureLaw(math.exp(-t), lambda_t(f, t, rel_tol))
