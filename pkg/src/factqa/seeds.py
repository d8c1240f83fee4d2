"""Deterministic seed fan-out.

One global seed is split into named sub-seeds (corpus, init, lime,
fakefacts, sides, ...) by stable hashing, so each component stays
independently reproducible no matter what ran before it.
"""

import hashlib

import numpy as np


def subseed(seed: int, name: str) -> int:
    """Derive a stable 63-bit sub-seed from a global seed and a label."""
    digest = hashlib.sha256(f"{seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def rng_for(seed: int, name: str) -> np.random.Generator:
    """Generator seeded from `subseed(seed, name)`."""
    return np.random.default_rng(subseed(seed, name))
