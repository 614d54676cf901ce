"""Deterministic counter-based random numbers.

All randomness in the package flows through a splitmix64-style counter
generator: the value at stream position k depends only on (key, k), never
on how many draws happened before. That makes every consumer reproducible
from a single seed and lets independent consumers share a seed without
coordinating state, via `derive_key` domain separation.

Normal draws use Box-Muller over the uniform stream.
"""

from __future__ import annotations

import hashlib

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
_MASK = 0xFFFFFFFFFFFFFFFF


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer; uint64 arithmetic wraps mod 2**64 by design."""
    x = (x ^ (x >> np.uint64(30))) * _MIX_A
    x = (x ^ (x >> np.uint64(27))) * _MIX_B
    return x ^ (x >> np.uint64(31))


def derive_key(*parts) -> int:
    """Fold seed components (ints, strings, floats) into a 64-bit stream key.

    Gives domain separation: derive_key(seed, "init") and
    derive_key(seed, "shuffle", 3) address unrelated streams.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def uniforms_at(key: int, positions: np.ndarray) -> np.ndarray:
    """Doubles in (0, 1) at the given uint64 stream positions."""
    state = (positions + np.uint64(1)) * _GAMMA + np.uint64(key & _MASK)
    bits = _mix64(state) >> np.uint64(11)
    # +0.5 keeps the value strictly inside (0, 1) so log() below is safe
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


def uniforms(key: int, start: int, count: int) -> np.ndarray:
    """`count` consecutive uniform draws starting at stream position `start`."""
    return uniforms_at(key, np.arange(start, start + count, dtype=np.uint64))


def normals(key: int, start: int, count: int) -> np.ndarray:
    """Standard normal draws via Box-Muller.

    Draw k consumes uniform positions 2k and 2k+1, so disjoint normal
    ranges never share underlying uniforms.
    """
    k = np.arange(start, start + count, dtype=np.uint64)
    u1 = uniforms_at(key, np.uint64(2) * k)
    u2 = uniforms_at(key, np.uint64(2) * k + np.uint64(1))
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


class CounterStream:
    """Stateful cursor over the counter stream, for sequential consumers."""

    def __init__(self, key: int):
        self.key = key
        self._cursor = 0

    def normals(self, count: int) -> np.ndarray:
        out = normals(self.key, self._cursor, count)
        self._cursor += count
        return out

    def uniforms(self, count: int) -> np.ndarray:
        out = uniforms(self.key, self._cursor, count)
        self._cursor += count
        return out

    def permutation(self, n: int) -> np.ndarray:
        """A uniform random permutation of range(n)."""
        return np.argsort(self.uniforms(n), kind="stable")
