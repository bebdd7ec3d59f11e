"""Named, counter-based random substreams derived from one master seed.

``substream(seed, "channel", 3)`` always yields the same Philox stream, and
adding a new name never shifts the draws of an existing one.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def substream(seed: int, *names) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(n) for n in names))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *names) -> int:
    """A 63-bit integer seed for a named child (used for per-point sweep seeds)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(n) for n in names))
    lo, hi = (int(v) for v in ss.generate_state(2, dtype=np.uint32))
    return (lo | (hi << 32)) >> 1
