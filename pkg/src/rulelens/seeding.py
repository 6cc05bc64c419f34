"""Deterministic RNG derivation.

All randomness in the engine flows from one master seed. Stage names and
per-instance identities are folded into the seed material by hashing, so
any stage (or any single instance's explanation) can be reproduced in
isolation, independent of dataset order or thread scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_words(tag) -> list[int]:
    if isinstance(tag, bytes):
        data = tag
    else:
        data = str(tag).encode()
    digest = hashlib.blake2b(data, digest_size=8).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in (0, 4)]


def spawn_rng(seed: int, *tags) -> np.random.Generator:
    """A PCG64 generator keyed by ``seed`` plus arbitrary stage/instance tags."""
    entropy = [int(seed) & 0xFFFFFFFF]
    for tag in tags:
        entropy.extend(_tag_words(tag))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *tags) -> int:
    """A stable 63-bit integer sub-seed for the same key material."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed).to_bytes(8, "little", signed=True))
    for tag in tags:
        h.update(tag if isinstance(tag, bytes) else str(tag).encode())
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "little") >> 1
