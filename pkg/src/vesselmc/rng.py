"""Counter-based random streams.

Every variate is a pure function of ``(seed, stream_id, counter)``: the
stream key is a mix of seed and stream id, and draw ``i`` is the SplitMix64
output for ``key + (i + 1) * GAMMA``.  No generator state is shared, so
particles can be simulated in any order or partition and still see the same
numbers.  All arithmetic is 64-bit unsigned with wraparound, which gives the
same integers on every platform.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_STREAM_SALT = np.uint64(0xD1B54A32D192ED03)
_SEED_SALT = np.uint64(0x632BE59BD9B4E019)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV_2_53 = 1.0 / 9007199254740992.0
_MASK64 = (1 << 64) - 1


@nb.njit(cache=True, inline="always", error_model="numpy")
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True, inline="always", error_model="numpy")
def stream_key(seed, stream_id):
    seed = np.uint64(seed)
    stream_id = np.uint64(stream_id)
    return mix64(mix64(seed ^ _SEED_SALT) ^ (stream_id * _STREAM_SALT + GAMMA))


@nb.njit(cache=True, inline="always", error_model="numpy")
def draw_u64(key, counter):
    # Explicit casts: numba promotes mixed int64/uint64 arithmetic to float.
    key = np.uint64(key)
    counter = np.uint64(counter)
    return mix64(key + (counter + _ONE) * GAMMA)


@nb.njit(cache=True, inline="always", error_model="numpy")
def draw_uniform(key, counter):
    """Uniform on [0, 1) with 53 random bits."""
    return float(draw_u64(key, counter) >> _S11) * _INV_2_53


@nb.njit(cache=True, error_model="numpy")
def _ndtri_tail(q, r):
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        val = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r
                    + 0.24178072517745061177) * r + 1.27045825245236838258) * r
                  + 3.64784832476320460504) * r + 5.7694972214606914055) * r
                + 4.6303378461565452959) * r + 1.42343711074968357734) / (
            ((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r
                 + 0.0151986665636164571966) * r + 0.14810397642748007459) * r
               + 0.68976733498510000455) * r + 1.6763848301838038494) * r
             + 2.05319162663775882187) * r + 1.0)
    else:
        r -= 5.0
        val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r
                    + 0.0012426609473880784386) * r + 0.026532189526576123093) * r
                  + 0.29656057182850489123) * r + 1.7848265399172913358) * r
                + 5.4637849111641143699) * r + 6.6579046435011037772) / (
            ((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r
                 + 1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r
               + 0.0148753612908506148525) * r + 0.13692988092273580531) * r
             + 0.59983220655588793769) * r + 1.0)
    return -val if q < 0.0 else val


@nb.njit(cache=True, inline="always", error_model="numpy")
def ndtri(p):
    """Standard normal quantile (Wichura's AS241, relative accuracy ~1e-16)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r
                         + 67265.770927008700853) * r + 45921.953931549871457) * r
                       + 13731.693765509461125) * r + 1971.5909503065514427) * r
                     + 133.14166789178437745) * r + 3.387132872796366608) / (
            ((((((r * 5226.495278852545925 + 28729.085735721942674) * r
                 + 39307.89580009271061) * r + 21213.794301586595867) * r
               + 5394.1960214247511077) * r + 687.1870074920579083) * r
             + 42.313330701600911252) * r + 1.0)
    r = p if q < 0.0 else 1.0 - p
    return _ndtri_tail(q, r)


@nb.njit(cache=True, inline="always", error_model="numpy")
def draw_normal(key, counter):
    # u in [0, 1) shifted to the open interval (0, 1)
    u = float(draw_u64(key, counter) >> _S11) * _INV_2_53 + 0.5 * _INV_2_53
    return ndtri(u)


@nb.njit(cache=True, error_model="numpy")
def _uniform_block(key, start, n):
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = draw_uniform(key, np.uint64(start + i))
    return out


@nb.njit(cache=True, error_model="numpy")
def _normal_block(key, start, n):
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = draw_normal(key, np.uint64(start + i))
    return out


def _as_u64(value: int) -> np.uint64:
    return np.uint64(int(value) & _MASK64)


class RngStream:
    """One deterministic random stream identified by ``(global_seed, stream_id)``.

    Draws advance an internal counter; two streams built from the same pair
    produce identical sequences.  ``numpy_generator`` returns a Philox-backed
    :class:`numpy.random.Generator` keyed by the same pair for distributions
    (binomial, multinomial) that are not worth hand-rolling.
    """

    __slots__ = ("global_seed", "stream_id", "_key", "counter")

    def __init__(self, global_seed: int, stream_id: int):
        self.global_seed = int(global_seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        self._key = np.uint64(stream_key(_as_u64(self.global_seed), _as_u64(self.stream_id)))
        self.counter = 0

    def __repr__(self) -> str:
        return f"RngStream(global_seed={self.global_seed}, stream_id={self.stream_id}, counter={self.counter})"

    @property
    def key(self) -> np.uint64:
        return self._key

    def uniform(self, size: int | None = None):
        n = 1 if size is None else int(size)
        out = _uniform_block(self._key, self.counter, n)
        self.counter += n
        return float(out[0]) if size is None else out

    def normal(self, size: int | None = None):
        n = 1 if size is None else int(size)
        out = _normal_block(self._key, self.counter, n)
        self.counter += n
        return float(out[0]) if size is None else out

    def bernoulli(self, p: float, size: int | None = None):
        u = self.uniform(size)
        return u < p

    def child(self, index: int) -> "RngStream":
        """Independent sub-stream, e.g. one per hop or per seed of a sweep."""
        sub_seed = int(draw_u64(self._key, np.uint64(0xFFFFFFFF00000000)))
        return RngStream(sub_seed, index)

    def numpy_generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=(int(self._key) << 64) | self.stream_id))


def derive_stream(seed: int, stream_id: int) -> RngStream:
    return RngStream(seed, stream_id)
