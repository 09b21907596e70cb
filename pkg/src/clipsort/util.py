"""Seed derivation shared by every randomized component.

All randomness in the package flows from a single user seed; submodules get
sub-seeds by stable hashing of (seed, purpose label), so runs are bit
reproducible and independent of call order.
"""

import hashlib

import numpy as np


def derive_seed(seed: int, label: str) -> int:
    """Stable, platform-independent sub-seed for (seed, purpose label)."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF


def rng_for(seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, label))
