import math

import numpy as np
import pytest

from frogdrift import chainsim
from frogdrift.chainsim import ChainPath, count_K, exact_law_N, simulate_M, simulate_N
from frogdrift.criteria import Discrete, expected_K, tau_j
from frogdrift.intensity import DISCRETE, Constant, Example42, Linear
from frogdrift.rng import RandomStream
from frogdrift.stats import histogram, tv_distance

R = 100_000
LINEAR = Linear(1, domain=DISCRETE)


def test_path_shape():
    d = Discrete(2 / 3)
    for r in range(2000):
        m = simulate_M(LINEAR, d, 12, RandomStream(1, r)).values
        n = simulate_N(LINEAR, d, 12, RandomStream(1, r)).values
        assert m[0] == 1 and n[0] == 1 and m[1] in (0, 1) and n[1] in (0, 1)
        zeros = np.flatnonzero(m == 0)
        if zeros.size:
            assert not m[zeros[0]:].any()
            # coupling: identical prefix up to the first zero
            assert np.array_equal(m[: zeros[0] + 1], n[: zeros[0] + 1])
        else:
            assert np.array_equal(m, n)


def test_no_births_product_formula():
    d = Discrete(0.6)
    ens = chainsim.run_ensemble(Constant(0), d, 6, 2, 0, R, checkpoints=range(1, 7))
    for j in range(1, 7):
        p = np.mean(ens.checkpoint_values[:, j - 1] > 0)
        assert abs(p - d.rho**j) < 4 * math.sqrt(d.rho**j / R)
    # without births N is the same chain as M
    assert np.array_equal(ens.checkpoint_values, ens.checkpoint_values_free)


def test_fast_growth_survives():
    ens = chainsim.run_ensemble(LINEAR, Discrete(2 / 3), 50, 3, 0, 20_000)
    assert np.mean(ens.final > 0) >= 0.05


def test_count_K_examples():
    d = Discrete(2 / 3)
    assert count_K(ChainPath(np.array([1, 1, 3, 2]), d)) == 0
    assert count_K(ChainPath(np.array([1, 0, 1, 0]), d)) == 2


def test_exact_law_examples():
    d = Discrete(2 / 3)
    law = exact_law_N(Constant(1), d, 1)
    assert law.bernoulli_q == pytest.approx(d.rho) and law.poisson_mean == 0.0
    law = exact_law_N(Constant(1), d, 3)
    assert law.bernoulli_q == pytest.approx(1 / 8, rel=1e-14)
    assert law.poisson_mean == pytest.approx(0.75, rel=1e-14)
    for j in (1, 4, 9):
        law = exact_law_N(LINEAR, d, j)
        assert law.pmf(0) == pytest.approx((1 - d.rho**j) * math.exp(-tau_j(LINEAR, d, j)), rel=1e-12)
    with pytest.raises(ValueError):
        exact_law_N(Constant(1), d, 0)


@pytest.mark.parametrize("f", [Constant(1), LINEAR, Example42()])
@pytest.mark.parametrize("p", [2 / 3, 0.75])
@pytest.mark.parametrize("j", [3, 10])
def test_law_of_N(f, p, j):
    d = Discrete(p)
    ens = chainsim.run_ensemble(f, d, j, 17, 0, R)
    assert tv_distance(histogram(ens.final_n), exact_law_N(f, d, j)) <= 0.02


def test_mean_K():
    d = Discrete(2 / 3)
    for f in (Constant(1), LINEAR):
        ens = chainsim.run_ensemble(f, d, 200, 5, 0, 20_000)
        k = ens.k_count.astype(float)
        se = k.std(ddof=1) / math.sqrt(k.size)
        assert abs(k.mean() - expected_K(f, d, 200)) <= 3 * se


def test_ensemble_matches_single_paths():
    d = Discrete(0.75)
    ens = chainsim.run_ensemble(Example42(), d, 30, 8, 100, 140, checkpoints=[2, 9, 30])
    for i, r in enumerate(range(100, 140)):
        n = simulate_N(Example42(), d, 30, RandomStream(8, r))
        m = simulate_M(Example42(), d, 30, RandomStream(8, r))
        assert ens.final_n[i] == n.final and ens.final[i] == m.final
        assert ens.k_count[i] == count_K(n)
        assert list(ens.checkpoint_values_free[i]) == [n.values[2], n.values[9], n.values[30]]
        assert list(ens.checkpoint_values[i]) == [m.values[2], m.values[9], m.values[30]]


def test_explosion_cap():
    with pytest.raises(chainsim.ExplosionError):
        simulate_N(Constant(1e6), Discrete(0.6), 5, RandomStream(1), cap=1000)
    with pytest.raises(ValueError):
        simulate_M(Constant(1), Discrete(0.6), 0, RandomStream(1))
