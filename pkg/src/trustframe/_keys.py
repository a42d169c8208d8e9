"""Stable ordering and seeding helpers.

Everything that must be reproducible across processes goes through here:
Python's ``hash`` is salted per interpreter, so it is never used for seeds.
"""

from __future__ import annotations

import hashlib
import re
from functools import lru_cache

import numpy as np

_DIGITS = re.compile(r"(\d+)")


@lru_cache(maxsize=1 << 16)
def node_key(node_id: str) -> tuple:
    """Natural sort key, so that N2 sorts before N10."""
    parts = _DIGITS.split(node_id)
    return tuple(int(p) if i % 2 else p for i, p in enumerate(parts)) + (node_id,)


def stable_int(*parts: object) -> int:
    digest = hashlib.blake2b("\x1f".join(map(str, parts)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_rng(master_seed: int, *key: object) -> np.random.Generator:
    """Independent generator for a (purpose, entity, round, ...) key."""
    return np.random.default_rng([master_seed & 0xFFFFFFFFFFFFFFFF, stable_int(*key)])
