"""Law comparison, Monte Carlo estimates and replica fan-out."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.special import gammaincc

from . import bdsim, chainsim
from .bdsim import MixtureLaw
from .criteria import Continuous, ModelParams
from .intensity import IntensityFn, rescale_to_half_drift

# Replicas per task; fixed so results never depend on the thread count.
CHUNK = 4096
Z95 = 1.959963984540054


class DegenerateSupportError(ValueError):
    """Fewer than two buckets survive merging."""


class SimulationError(RuntimeError):
    def __init__(self, message: str, replicas: list[int]):
        super().__init__(f"{message}: replicas {replicas[:20]}{' ...' if len(replicas) > 20 else ''}")
        self.replicas = replicas


# ---------------------------------------------------------------------------
# goodness of fit


def _counts(empirical) -> np.ndarray:
    if isinstance(empirical, Mapping):
        if not empirical:
            return np.zeros(1, dtype=np.int64)
        out = np.zeros(max(empirical) + 1, dtype=np.int64)
        for k, c in empirical.items():
            if k < 0:
                raise ValueError("values must be nonnegative")
            out[k] += c
        return out
    return np.asarray(empirical, dtype=np.int64)


def _buckets(empirical, law: MixtureLaw) -> tuple[np.ndarray, np.ndarray, int]:
    """Observed counts and law probabilities on 0..K-1 plus a tail bucket."""
    counts = _counts(empirical)
    n = int(counts.sum())
    if n <= 0:
        raise ValueError("empirical sample is empty")
    q = law.table()
    K = q.size
    obs = np.zeros(K + 1)
    m = min(K, counts.size)
    obs[:m] = counts[:m]
    obs[K] = counts[K:].sum()
    probs = np.append(q, max(0.0, 1.0 - q.sum()))
    return obs, probs, n


def histogram(samples) -> np.ndarray:
    """Counts by value of nonnegative integer samples."""
    return np.bincount(np.asarray(samples, dtype=np.int64))


def tv_distance(empirical, law: MixtureLaw) -> float:
    """Half the L1 distance between empirical frequencies and the law.

    ``empirical`` is a count-by-value array (index = value) or a mapping.
    """
    obs, probs, n = _buckets(empirical, law)
    return 0.5 * float(np.abs(obs / n - probs).sum())


@dataclass
class GofReport:
    tv_distance: float
    chi_square_stat: float
    dof: int
    p_value: float
    sample_size: int

    def as_dict(self) -> dict:
        return {
            "tvDistance": self.tv_distance,
            "chiSquareStat": self.chi_square_stat,
            "dof": self.dof,
            "pValue": self.p_value,
            "sampleSize": self.sample_size,
        }


def _merge(obs: np.ndarray, exp: np.ndarray, min_expected: float):
    mo, me = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            mo.append(acc_o)
            me.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if me:
            mo[-1] += acc_o
            me[-1] += acc_e
        else:
            mo.append(acc_o)
            me.append(acc_e)
    return np.array(mo), np.array(me)


def chi_square_gof(empirical, law: MixtureLaw, min_expected: float = 5.0) -> GofReport:
    """Pearson chi-square after merging adjacent buckets to expected >= min_expected."""
    if min_expected < 5:
        raise ValueError("min_expected must be at least 5")
    obs, probs, n = _buckets(empirical, law)
    tv = 0.5 * float(np.abs(obs / n - probs).sum())
    mo, me = _merge(obs, probs * n, min_expected)
    if mo.size < 2:
        raise DegenerateSupportError("fewer than two buckets after merging")
    stat = float(np.sum((mo - me) ** 2 / me))
    dof = int(mo.size - 1)
    return GofReport(tv, stat, dof, float(gammaincc(dof / 2.0, stat / 2.0)), n)


# ---------------------------------------------------------------------------
# estimates


@dataclass
class MCEstimate:
    mean: float
    std_error: float
    ci95: tuple[float, float]
    replicas: int
    master_seed: int

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stdError": self.std_error,
            "ci95": list(self.ci95),
            "replicas": self.replicas,
            "masterSeed": self.master_seed,
        }


def proportion_estimate(successes: int, n: int, master_seed: int) -> MCEstimate:
    """Wilson score interval."""
    p = successes / n
    se = math.sqrt(p * (1.0 - p) / n)
    z2 = Z95 * Z95
    centre = (p + z2 / (2 * n)) / (1 + z2 / n)
    half = Z95 * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n)
    return MCEstimate(p, se, (min(p, centre - half), max(p, centre + half)), n, master_seed)


def mean_estimate(values: np.ndarray, master_seed: int) -> MCEstimate:
    n = values.size
    m = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return MCEstimate(m, se, (m - Z95 * se, m + Z95 * se), n, master_seed)


# ---------------------------------------------------------------------------
# fan-out


def fan_out(task: Callable[[int, int], object], replicas: int, threads: int = 1) -> list:
    """Run ``task(r0, r1)`` over fixed chunks of [0, replicas), in chunk order."""
    bounds = [(a, min(a + CHUNK, replicas)) for a in range(0, replicas, CHUNK)]
    if threads <= 1 or len(bounds) == 1:
        return [task(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: task(*ab), bounds))


@dataclass(frozen=True)
class SimulatorSpec:
    """Which reduced process to run: continuous drift or discrete chain."""

    f: IntensityFn
    model: ModelParams


@dataclass
class EnsembleResult:
    """Per-replica outcomes in replica order.

    ``final`` is the absorbing process (X or M) at the horizon, ``stop`` its
    absorption time or index (nan when alive), ``count`` is V or K of the
    non-absorbing process.  ``checkpoint_values`` are X or M at the
    checkpoints and ``free_values`` are Y or N there.
    """

    final: np.ndarray
    absorbed: np.ndarray
    stop: np.ndarray
    count: np.ndarray
    checkpoints: np.ndarray
    checkpoint_values: np.ndarray
    free_values: np.ndarray


def run_simulation(spec: SimulatorSpec, horizon: float, replicas: int, master_seed: int,
                   threads: int = 1, checkpoints=(), absorbing: bool = False) -> EnsembleResult:
    """Ensemble of the reduced process.  ``absorbing`` stops runs at 0 (no V/K)."""
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    model = spec.model
    if isinstance(model, Continuous):
        scale = 2.0 * model.lam
        g = rescale_to_half_drift(spec.f, model.lam)
        cps = [scale * c for c in checkpoints]

        def task(a, b):
            return bdsim.run_ensemble(g, scale * horizon, master_seed, a, b, cps, absorbing=absorbing)
    else:
        cps = list(checkpoints)
        if absorbing:
            raise ValueError("chain ensembles always run the restarting chain")

        def task(a, b):
            return chainsim.run_ensemble(spec.f, model, int(horizon), master_seed, a, b, cps)

    parts = fan_out(task, replicas, threads)
    status = np.concatenate([p.status for p in parts])
    bad = np.flatnonzero(status != 0).tolist()
    if bad:
        raise SimulationError("state exceeded the explosion cap", bad)
    final = np.concatenate([p.final for p in parts])
    absorbed = np.concatenate([p.absorbed for p in parts])
    if isinstance(model, Continuous):
        stop = np.concatenate([p.absorption_time for p in parts]) / scale
        count = np.concatenate([p.v_count for p in parts])
        cp_times = parts[0].checkpoints / scale
        free = np.concatenate([p.checkpoint_values_y for p in parts])
    else:
        stop = np.concatenate([p.absorption_index for p in parts]).astype(float)
        count = np.concatenate([p.k_count for p in parts])
        cp_times = parts[0].checkpoints
        free = np.concatenate([p.checkpoint_values_free for p in parts])
    stop[~absorbed] = math.nan
    cp_vals = np.concatenate([p.checkpoint_values for p in parts])
    return EnsembleResult(final, absorbed, stop, count, cp_times, cp_vals, free)


def estimate_survival(spec: SimulatorSpec, horizon: float, replicas: int, master_seed: int,
                      threads: int = 1) -> MCEstimate:
    """Fraction of replicas whose absorbing process is still positive at the horizon."""
    if replicas < 100:
        raise ValueError("need at least 100 replicas")
    absorbing = isinstance(spec.model, Continuous)
    res = run_simulation(spec, horizon, replicas, master_seed, threads, absorbing=absorbing)
    return proportion_estimate(int(np.count_nonzero(res.final > 0)), replicas, master_seed)


def estimate_mean_count(spec: SimulatorSpec, counter: str, horizon: float, replicas: int,
                        master_seed: int, threads: int = 1) -> MCEstimate:
    """Mean of V (continuous) or K (discrete) over the horizon."""
    want = "V" if isinstance(spec.model, Continuous) else "K"
    if counter != want:
        raise ValueError(f"counter {counter!r} does not apply to this model; use {want!r}")
    res = run_simulation(spec, horizon, replicas, master_seed, threads)
    return mean_estimate(res.count.astype(float), master_seed)
