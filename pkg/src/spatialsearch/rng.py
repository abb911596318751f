"""Named random streams derived from one 64-bit seed."""
from __future__ import annotations

import zlib

import numpy as np


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for ``name``; the same (seed, name, extra) always yields the same stream."""
    key = (zlib.crc32(name.encode()),) + tuple(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(int(seed) & (2 ** 64 - 1), spawn_key=key))


def child_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2 ** 63))
