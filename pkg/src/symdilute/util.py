"""Seed derivation, stable hashing, and canonical JSON helpers."""

from __future__ import annotations

import hashlib
import json
import random
from typing import Any

import numpy as np


def stable_digest(*parts: Any) -> str:
    """SHA-256 hex digest of the parts, independent of PYTHONHASHSEED."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bytes):
            h.update(part)
        else:
            h.update(str(part).encode("utf-8"))
        h.update(b"\x1e")
    return h.hexdigest()


def derived_seed(*parts: Any) -> int:
    return int(stable_digest(*parts)[:16], 16)


def derived_rng(*parts: Any) -> random.Random:
    """A stdlib RNG whose stream depends only on the given parts."""
    return random.Random(derived_seed(*parts))


def derived_np_rng(*parts: Any) -> np.random.Generator:
    return np.random.default_rng(derived_seed(*parts))


def canonical_json(obj: Any) -> str:
    """Key-sorted compact JSON; used for digests and cell hashes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
