"""Counter-based seed derivation: master seed -> run stream -> purpose substreams."""
from __future__ import annotations

import zlib

import numpy as np


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    return zlib.crc32(str(label).encode("utf-8"))


def seed_sequence(master_seed: int, *labels) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=tuple(_label_key(x) for x in labels)
    )


def stream(master_seed: int, *labels) -> np.random.Generator:
    """Independent generator for (master_seed, labels...), stable across runs and platforms."""
    return np.random.default_rng(seed_sequence(master_seed, *labels))


def derive_int(master_seed: int, *labels) -> int:
    """A 63-bit integer seed for (master_seed, labels...)."""
    return int(seed_sequence(master_seed, *labels).generate_state(1, dtype=np.uint64)[0] >> 1)
