"""Deterministic random streams keyed by (master seed, labels...)."""

from __future__ import annotations

import hashlib
from typing import Union

import numpy as np

StreamKey = Union[int, str, float]


def _key_to_int(key: StreamKey) -> int:
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)) and key >= 0:
        return int(key)
    digest = hashlib.sha256(repr(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], byteorder="big")


def seed_sequence(seed: int, *keys: StreamKey) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_key_to_int(key) for key in keys))


def substream(seed: int, *keys: StreamKey) -> np.random.Generator:
    """Return an independent generator for the labelled substream of `seed`.

    The same (seed, keys) always yields the same stream, whatever order or
    worker the caller runs in.
    """

    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))


def derive_seed(seed: int, *keys: StreamKey) -> int:
    """Stable non-negative integer seed for a nested configuration."""

    state = seed_sequence(seed, *keys).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


__all__ = ["derive_seed", "seed_sequence", "substream"]
