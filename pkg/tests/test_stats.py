import math

import numpy as np
import pytest
from scipy import stats as sps

from frogdrift import stats
from frogdrift.bdsim import MixtureLaw
from frogdrift.criteria import Continuous, Discrete, expected_K, expected_V
from frogdrift.intensity import Constant, Example42, LogFamily
from frogdrift.stats import (
    DegenerateSupportError, SimulatorSpec, chi_square_gof, estimate_mean_count, estimate_survival,
    histogram, mean_estimate, proportion_estimate, tv_distance,
)


def test_tv_examples():
    law = MixtureLaw(0.0, 0.0)
    assert tv_distance({0: 10}, law) == 0.0
    assert tv_distance({1: 10}, law) == 1.0
    law = MixtureLaw(0.25, 0.0)
    assert tv_distance(np.array([3, 1]), law) == pytest.approx(0.0, abs=1e-12)
    assert tv_distance({0: 1, 1: 1}, law) == pytest.approx(0.25)


def test_tv_self_consistency():
    law = MixtureLaw(math.exp(-1), 2.0)
    draws = law.sample(np.random.default_rng(0), 100_000)
    assert tv_distance(histogram(draws), law) <= 0.01


def test_tv_counts_tail_bucket():
    law = MixtureLaw(0.0, 1.0)
    # mass far beyond the tabulated range lands in the tail bucket
    assert tv_distance({500: 1}, law) == pytest.approx(1.0, abs=1e-9)


def test_chi_square_exact_match():
    law = MixtureLaw(0.5, 0.0)
    rep = chi_square_gof({0: 50, 1: 50}, law)
    assert rep.chi_square_stat == 0.0 and rep.p_value == 1.0
    assert rep.dof == 1 and rep.sample_size == 100


def test_chi_square_pvalue_matches_scipy():
    law = MixtureLaw(0.5, 4.0)
    draws = law.sample(np.random.default_rng(3), 5000)
    rep = chi_square_gof(histogram(draws), law)
    assert rep.p_value == pytest.approx(sps.chi2.sf(rep.chi_square_stat, rep.dof), rel=1e-10)


def test_chi_square_power():
    law = MixtureLaw(math.exp(-1), 2.0)
    shifted = MixtureLaw(math.exp(-1), 3.0).sample(np.random.default_rng(1), 100_000)
    assert chi_square_gof(histogram(shifted), law).p_value < 1e-3


def test_chi_square_calibration():
    law = MixtureLaw(math.exp(-1), 2.0)
    ok = sum(chi_square_gof(histogram(law.sample(np.random.default_rng(s), 100_000)), law).p_value > 1e-3
             for s in range(10))
    assert ok >= 9


def test_chi_square_errors():
    with pytest.raises(DegenerateSupportError):
        chi_square_gof({1: 100}, MixtureLaw(1.0, 0.0))
    with pytest.raises(ValueError):
        chi_square_gof({1: 100}, MixtureLaw(0.5, 1.0), min_expected=1)


def test_estimates():
    e = proportion_estimate(0, 100, 5)
    assert e.mean == 0 and e.ci95[0] == 0 and e.ci95[1] > 0
    e = proportion_estimate(30, 100, 5)
    lo, hi = e.ci95
    assert lo == pytest.approx(0.2189, abs=1e-4) and hi == pytest.approx(0.3958, abs=1e-4)
    m = mean_estimate(np.array([1.0, 2.0, 3.0, 4.0]), 0)
    assert m.mean == 2.5 and m.std_error == pytest.approx(math.sqrt(5 / 3) / 2)
    assert m.as_dict()["ci95"][0] < 2.5 < m.as_dict()["ci95"][1]


def test_survival_pure_death():
    spec = SimulatorSpec(Constant(0), Continuous(0.5))
    covered = 0
    for seed in range(20):
        e = estimate_survival(spec, 1.0, 4000, seed)
        covered += e.ci95[0] <= math.exp(-1) <= e.ci95[1]
    assert covered >= 19
    with pytest.raises(ValueError):
        estimate_survival(spec, 1.0, 50, 0)


def test_survival_positive_cases():
    e = estimate_survival(SimulatorSpec(LogFamily(2, 1), Continuous(0.5)), 200, 10_000, 1)
    assert e.ci95[0] > 0.02
    e = estimate_survival(SimulatorSpec(Example42(), Discrete(0.75)), 500, 10_000, 1)
    assert e.ci95[0] > 0.01


def test_mean_counts():
    e = estimate_mean_count(SimulatorSpec(Constant(0), Continuous(0.5)), "V", 10, 1000, 0)
    assert e.mean == 0
    e = estimate_mean_count(SimulatorSpec(Constant(1), Continuous(0.5)), "V", 50, 20_000, 2)
    assert abs(e.mean - expected_V(Constant(1), 50)) <= 3 * e.std_error
    d = Discrete(2 / 3)
    e = estimate_mean_count(SimulatorSpec(Constant(1), d), "K", 200, 20_000, 2)
    assert abs(e.mean - expected_K(Constant(1), d, 200)) <= 3 * e.std_error
    with pytest.raises(ValueError):
        estimate_mean_count(SimulatorSpec(Constant(1), d), "V", 200, 100, 2)


def test_mean_count_other_drift():
    # at lam = 1 the process runs on the doubled clock with f halved
    spec = SimulatorSpec(Constant(2), Continuous(1.0))
    e = estimate_mean_count(spec, "V", 25, 20_000, 3)
    assert abs(e.mean - expected_V(Constant(1), 50)) <= 3 * e.std_error


def test_standard_error_scaling():
    spec = SimulatorSpec(LogFamily(2, 1), Continuous(0.5))
    ses = [estimate_survival(spec, 20, n, 9).std_error for n in (1000, 4000, 16000)]
    for a, b in zip(ses, ses[1:]):
        assert a / b == pytest.approx(2.0, rel=0.2)


def test_fan_out_determinism():
    spec = SimulatorSpec(LogFamily(2, 1), Continuous(0.5))
    a = stats.run_simulation(spec, 10, 10_000, 4, threads=1, checkpoints=[2.0])
    b = stats.run_simulation(spec, 10, 10_000, 4, threads=8, checkpoints=[2.0])
    for name in ("final", "absorbed", "stop", "count", "checkpoint_values", "free_values"):
        assert np.array_equal(getattr(a, name), getattr(b, name), equal_nan=name == "stop")
    assert stats.fan_out(lambda a, b: (a, b), 9000, 3) == [(0, 4096), (4096, 8192), (8192, 9000)]


def test_simulation_errors_are_aggregated():
    spec = SimulatorSpec(Constant(5e9), Discrete(0.6))
    with pytest.raises(stats.SimulationError) as err:
        stats.run_simulation(spec, 3, 10, 0)
    assert err.value.replicas == list(range(10))
