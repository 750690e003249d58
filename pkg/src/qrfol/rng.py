"""Counter-based random streams.

Every variate is addressed by (master_seed, stream_index, index): the
Philox-4x64 key is (master_seed, stream_index) and one counter step yields
four 64-bit words.  Any slice of a stream can be regenerated on its own, so
block-parallel generation reproduces the serial result bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_WORDS_PER_BLOCK = 4
_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ChannelSeed:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if self.stream_index < 0:
            raise ValueError("stream_index must be >= 0")

    def substream(self, offset: int) -> "ChannelSeed":
        return ChannelSeed(self.master_seed, self.stream_index + offset)


def derive_stream(point_index: int, trial_index: int = 0, role: int = 0) -> int:
    """Pack (point, trial, role) into one stream index.

    role < 16, trial < 2**20.  Roles in use: 0 payload bits, 2/3 noise x/y.
    """
    if not 0 <= role < 16:
        raise ValueError("role must be in [0, 16)")
    if not 0 <= trial_index < (1 << 20):
        raise ValueError("trial_index must be in [0, 2**20)")
    if point_index < 0:
        raise ValueError("point_index must be >= 0")
    return (point_index << 24) | (trial_index << 4) | role


def raw_words(seed: ChannelSeed, start: int, count: int) -> np.ndarray:
    """Words ``start .. start+count-1`` of the stream as uint64."""
    if count <= 0:
        return np.empty(0, dtype=np.uint64)
    block = start // _WORDS_PER_BLOCK
    skip = start - block * _WORDS_PER_BLOCK
    bg = np.random.Philox(
        key=[seed.master_seed & _MASK64, seed.stream_index & _MASK64],
        counter=[block & _MASK64, block >> 64, 0, 0],
    )
    return bg.random_raw(skip + count)[skip:]


def _unit(words: np.ndarray, open_zero: bool) -> np.ndarray:
    u = (words >> np.uint64(11)).astype(np.float64)
    if open_zero:
        u += 1.0
    return u * (1.0 / 9007199254740992.0)


def standard_normal(seed: ChannelSeed, start: int, count: int) -> np.ndarray:
    """Normals ``start .. start+count-1`` of the stream (Box-Muller).

    Normal k is drawn from words 2*(k//2), 2*(k//2)+1; even k takes the
    cosine branch, odd k the sine branch.
    """
    if count <= 0:
        return np.empty(0)
    first_pair = start // 2
    last_pair = (start + count - 1) // 2
    words = raw_words(seed, 2 * first_pair, 2 * (last_pair - first_pair + 1))
    radius = np.sqrt(-2.0 * np.log(_unit(words[0::2], open_zero=True)))
    theta = _TWO_PI * _unit(words[1::2], open_zero=False)
    z = np.empty(2 * radius.size)
    z[0::2] = radius * np.cos(theta)
    z[1::2] = radius * np.sin(theta)
    skip = start - 2 * first_pair
    return z[skip:skip + count]


def random_bits(seed: ChannelSeed, count: int, start: int = 0) -> np.ndarray:
    """Fair bits (uint8) taken from the top bit of each word."""
    return (raw_words(seed, start, count) >> np.uint64(63)).astype(np.uint8)
