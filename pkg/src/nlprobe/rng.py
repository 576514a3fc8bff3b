"""Reproducible 64-bit random streams.

Every random number in the package comes from SplitMix64 (Steele, Lea &
Flood 2014, the seeding generator of the xorshift family).  State update and
output for draw ``n`` (counting from 1) of stream key ``s``::

    z  = s + n * 0x9E3779B97F4A7C15            (mod 2**64)
    z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9  (mod 2**64)
    z  = (z ^ (z >> 27)) * 0x94D049BB133111EB  (mod 2**64)
    out = z ^ (z >> 31)

A uniform double in [0, 1) is ``(out >> 11) * 2**-53``.  Independent
sub-streams are split off with ``key = mix(seed ^ (0x5851F42D4C957F2D * (id + 1)))``
where ``mix`` is the output function applied to a single value.  Since draw
``n`` depends only on ``(key, n)`` the whole sequence is vectorisable and
bit-reproducible in any language with wrapping 64-bit integers.
"""
from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SPLIT = np.uint64(0x5851F42D4C957F2D)
MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, stream: int = 0) -> int:
    """Key of sub-stream ``stream`` derived from a user seed."""
    with np.errstate(over="ignore"):
        z = np.uint64(seed & MASK64) ^ (_SPLIT * np.uint64(stream + 1))
        return int(_mix(np.array(z, dtype=np.uint64)))


def uint64_stream(key: int, count: int, start: int = 0) -> np.ndarray:
    """Raw outputs ``start+1 .. start+count`` of the stream with the given key."""
    n = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(key & MASK64) + n * GOLDEN
        return _mix(z)


def uniform(key: int, shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """Uniform doubles in ``[low, high)`` filling ``shape`` in C order."""
    count = int(np.prod(shape))
    u = (uint64_stream(key, count) >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return (low + (high - low) * u).reshape(shape)
