import numpy as np
import pytest

from conftest import draw_double, draw_u64
from frogdrift.rng import RandomStream, default_seed


@pytest.mark.parametrize("seed,replica", [(0, 0), (1, 0), (12345, 7), (2**64 - 1, 2**40 + 3)])
def test_raw_output_matches_numpy_philox(seed, replica):
    rs = RandomStream(seed, replica)
    ours = draw_u64(rs.state(), 1001)
    ref = np.random.Philox(key=seed | (replica << 64)).random_raw(1001).astype(np.uint64)
    np.testing.assert_array_equal(ours, ref)


def test_addressed_substream_matches_counter():
    rs = RandomStream(99, 5)
    addr = (3, 17, 2)
    ours = draw_u64(rs.state(addr), 37)
    bit = np.random.Philox(key=99 | (5 << 64), counter=[0, 3, 17, 2])
    np.testing.assert_array_equal(ours, bit.random_raw(37).astype(np.uint64))


def test_doubles_match_generator_random():
    rs = RandomStream(2024, 3)
    np.testing.assert_array_equal(draw_double(rs.state(), 500), rs.generator().random(500))


def test_streams_are_replayed_from_the_start():
    rs = RandomStream(5, 1)
    np.testing.assert_array_equal(draw_u64(rs.state(), 10), draw_u64(rs.state(), 10))


def test_replicas_and_addresses_differ():
    a = draw_u64(RandomStream(5, 1).state(), 8)
    b = draw_u64(RandomStream(5, 2).state(), 8)
    c = draw_u64(RandomStream(5, 1).state((1, 0, 0)), 8)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_spawn_keeps_master():
    rs = RandomStream(11).spawn(4)
    assert (rs.master_seed, rs.replica) == (11, 4)


@pytest.mark.parametrize("seed,replica", [(-1, 0), (2**64, 0), (0, -2)])
def test_rejects_out_of_range_keys(seed, replica):
    with pytest.raises(ValueError):
        RandomStream(seed, replica)


def test_default_seed_from_env(monkeypatch):
    monkeypatch.setenv("FROGDRIFT_SEED", "314")
    assert default_seed() == 314
    monkeypatch.delenv("FROGDRIFT_SEED")
    assert default_seed() == 0
