"""Deterministic seeded random streams for reproducible basis generation.

Basis pools are never stored or transmitted — only a 64-bit master seed
travels inside an artifact — so every conforming implementation must
regenerate identical pools bit-for-bit.  That rules out library RNGs whose
stream definitions may drift between releases; instead the generator
(xoshiro256**), the seeding schedule (splitmix64), and the uniform/Gaussian
derivations are pinned here.

Stream discipline: each consumer derives an independent substream from
``(master_seed, tag, index)`` via :func:`derive_substream`, so generation
order (serial, parallel, or partial regeneration of a few bases) never
changes the output.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "TAG_A",
    "TAG_B",
    "TAG_TRIAL",
    "TAG_SYNTH",
    "RngStream",
    "splitmix64_mix",
    "derive_substream",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Substream tag constants.  Pool A and pool B are fixed by the artifact
# layout; trial/synth tags follow the same spacing so no (tag + index)
# pair can collide for index < 2**32.
TAG_A = 0
TAG_B = 1 << 32
TAG_TRIAL = 1 << 33
TAG_SYNTH = 1 << 34

# Scaling constant mapping the top 53 bits of a u64 to [0, 1).
_U53 = 2.0**-53
_TWO_PI = 2.0 * math.pi


def splitmix64_mix(x: int) -> int:
    """One splitmix64 step from state ``x``: advance by the golden gamma and
    finalize.  Used both for sub-seed derivation and for stream seeding."""
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class RngStream:
    """xoshiro256** stream seeded from a 64-bit sub-seed.

    The 256-bit state is filled with four successive splitmix64 outputs, the
    standard hedge against poorly mixed seeds (and against the all-zero
    state, which xoshiro cannot leave).
    """

    __slots__ = ("_s0", "_s1", "_s2", "_s3")

    def __init__(self, sub_seed: int) -> None:
        if not 0 <= sub_seed <= _MASK64:
            raise ValueError(f"sub_seed must be an unsigned 64-bit integer, got {sub_seed}")
        s = sub_seed
        words = []
        for _ in range(4):
            s = (s + _GOLDEN) & _MASK64
            z = ((s ^ (s >> 30)) * _MIX1) & _MASK64
            z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
            words.append(z ^ (z >> 31))
        if not any(words):  # unreachable in practice; xoshiro requires nonzero state
            words[0] = 1
        self._s0, self._s1, self._s2, self._s3 = words

    def next_u64(self) -> int:
        """Advance the state one step and return the next 64-bit output."""
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        x = (s1 * 5) & _MASK64
        result = (((x << 7) | (x >> 57)) & _MASK64) * 9 & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def raw_block(self, count: int) -> np.ndarray:
        """Next ``count`` raw outputs as a uint64 array (one sequential pass)."""
        if count < 0:
            raise ValueError(f"count must be >= 0, got {count}")
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        out = np.empty(count, dtype=np.uint64)
        for i in range(count):
            x = (s1 * 5) & _MASK64
            out[i] = (((x << 7) | (x >> 57)) & _MASK64) * 9 & _MASK64
            t = (s1 << 17) & _MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return out

    def uniform(self) -> float:
        """Next double in [0, 1): top 53 bits of one raw output."""
        return (self.next_u64() >> 11) * _U53

    def uniform_block(self, count: int) -> np.ndarray:
        """Next ``count`` uniforms in [0, 1) as a float64 array."""
        return (self.raw_block(count) >> np.uint64(11)).astype(np.float64) * _U53

    def gaussian_block(self, count: int) -> np.ndarray:
        """Next ``count`` standard Gaussians (Box-Muller, cosine branch only).

        Each Gaussian consumes exactly two uniforms; the sine mate is never
        produced or cached, so the raw-stream position after ``count`` draws
        is ``2 * count`` regardless of call slicing.  A zero first uniform is
        replaced by 2**-53 to keep the log finite.
        """
        u = self.uniform_block(2 * count)
        u1 = u[0::2]
        u2 = u[1::2]
        u1 = np.where(u1 == 0.0, _U53, u1)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)

    def gaussian(self) -> float:
        """Next standard Gaussian (scalar path, same stream as the block path)."""
        u1 = self.uniform()
        u2 = self.uniform()
        if u1 == 0.0:
            u1 = _U53
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)


def derive_substream(master_seed: int, tag: int, index: int) -> RngStream:
    """Independent stream for ``(master_seed, tag, index)``.

    The sub-seed is ``splitmix64_mix(master_seed XOR (tag + index))``; distinct
    (tag, index) pairs therefore get decorrelated 256-bit states and may be
    generated in any order or in parallel with identical results.
    """
    if index < 0:
        raise ValueError(f"index must be >= 0, got {index}")
    sub_seed = splitmix64_mix((master_seed ^ (tag + index)) & _MASK64)
    return RngStream(sub_seed)
