"""Counter-based random streams.

Every replica owns a Philox4x64-10 stream keyed by ``(master_seed, replica)``.
The kernel below is bit-compatible with :class:`numpy.random.Philox`, so a
stream can be replayed from Python with :meth:`RandomStream.generator`.

Stream state is a small ``uint64`` array so that numba kernels can carry it
around without object overhead::

    [ctr0, ctr1, ctr2, ctr3, key0, key1, buffer_pos, buf0, buf1, buf2, buf3]

Sub-streams are addressed by the upper counter words ``(ctr1, ctr2, ctr3)``;
``ctr0`` is the running block index and never wraps in practice, so distinct
addresses never overlap.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from numba import njit

_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)
_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_INV53 = 1.0 / 9007199254740992.0

STATE_SIZE = 11
_MAX_U64 = (1 << 64) - 1


@njit(cache=True, inline="always")
def _mulhilo(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    p0 = a_lo * b_lo
    p1 = a_lo * b_hi
    p2 = a_hi * b_lo
    p3 = a_hi * b_hi
    mid = (p0 >> _S32) + (p1 & _MASK32) + (p2 & _MASK32)
    hi = p3 + (p1 >> _S32) + (p2 >> _S32) + (mid >> _S32)
    return hi, a * b


@njit(cache=True)
def _philox_block(st):
    c0 = st[0]
    c1 = st[1]
    c2 = st[2]
    c3 = st[3]
    k0 = st[4]
    k1 = st[5]
    for _ in range(10):
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = k0 + _W0
        k1 = k1 + _W1
    st[7] = c0
    st[8] = c1
    st[9] = c2
    st[10] = c3


@njit(cache=True)
def next_u64(st):
    pos = st[6]
    if pos < 4:
        st[6] = pos + _ONE
        return st[7 + np.int64(pos)]
    st[0] += _ONE
    if st[0] == _ZERO:
        st[1] += _ONE
        if st[1] == _ZERO:
            st[2] += _ONE
            if st[2] == _ZERO:
                st[3] += _ONE
    _philox_block(st)
    st[6] = _ONE
    return st[7]


@njit(cache=True)
def next_double(st):
    """Uniform on [0, 1) with 53 random bits (numpy's ``random()`` map)."""
    return np.float64(next_u64(st) >> _S11) * _INV53


@njit(cache=True)
def next_open_double(st):
    """Uniform on (0, 1]; safe to take the logarithm of."""
    return 1.0 - next_double(st)


@njit(cache=True)
def init_state(st, key0, key1, c1, c2, c3):
    st[0] = _ZERO
    st[1] = c1
    st[2] = c2
    st[3] = c3
    st[4] = key0
    st[5] = key1
    st[6] = np.uint64(4)


@njit(cache=True)
def new_state(key0, key1, c1, c2, c3):
    st = np.empty(STATE_SIZE, dtype=np.uint64)
    init_state(st, key0, key1, c1, c2, c3)
    return st


def _u64(x: int) -> np.uint64:
    return np.uint64(int(x) & _MAX_U64)


@dataclass(frozen=True)
class RandomStream:
    """Key of one replica's stream.

    The stream is a key, not a cursor: every simulation call replays it from
    its first draw, so two simulators handed the same stream see the same
    uniforms.
    """

    master_seed: int
    replica: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed <= _MAX_U64:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        if not 0 <= self.replica <= _MAX_U64:
            raise ValueError("replica index must fit in 64 unsigned bits")

    @property
    def key(self) -> tuple[np.uint64, np.uint64]:
        return _u64(self.master_seed), _u64(self.replica)

    def state(self, address: tuple[int, int, int] = (0, 0, 0)) -> np.ndarray:
        k0, k1 = self.key
        return new_state(k0, k1, *(_u64(a) for a in address))

    def generator(self, address: tuple[int, int, int] = (0, 0, 0)) -> np.random.Generator:
        """A numpy generator producing exactly this stream's raw output."""
        key = int(self.master_seed) | (int(self.replica) << 64)
        counter = np.array([0, *(int(a) & _MAX_U64 for a in address)], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key, counter=counter))

    def spawn(self, replica: int) -> "RandomStream":
        return RandomStream(self.master_seed, replica)


def default_seed() -> int:
    """Seed from ``FROGDRIFT_SEED``, falling back to 0."""
    raw = os.environ.get("FROGDRIFT_SEED")
    return int(raw) if raw else 0
