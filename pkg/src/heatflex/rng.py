"""Deterministic random streams.

All randomness in the package flows through Philox4x64-10, a counter-based
generator whose output is fully determined by a 128-bit key. Independent
streams are derived from a user seed plus a tuple of small integers
(window index, scenario index, purpose tag, ...) folded with FNV-1a, so any
stage of the pipeline can be reproduced in isolation, bit for bit.
"""

from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

# purpose tags for derived streams
STREAM_SCENARIO = 1
STREAM_REALIZED = 2
STREAM_TEMPERATURE = 3
STREAM_PRICE = 4
STREAM_FREQUENCY = 5
STREAM_INIT_STATE = 6


def fold_ids(ids) -> int:
    """FNV-1a fold of a tuple of non-negative ints into one 64-bit word."""
    h = _FNV_OFFSET
    for x in ids:
        x = int(x)
        if x < 0:
            raise ValueError(f"stream ids must be non-negative, got {x}")
        # hash 8 bytes of each id, little-endian
        for _ in range(8):
            h = ((h ^ (x & 0xFF)) * _FNV_PRIME) & _MASK64
            x >>= 8
    return h


def derive_rng(seed: int, *ids: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *ids)."""
    key = np.array([int(seed) & _MASK64, fold_ids(ids)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
