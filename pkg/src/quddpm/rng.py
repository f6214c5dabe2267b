"""Deterministic named RNG substreams.

All randomness in a run flows from a single 64-bit master seed. Components
ask for substreams by name (e.g. ``substream(seed, "diffusion", "sample", 7,
"step", 3)``), which makes parallel evaluation order irrelevant and replay
bit-exact.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _digest_words(parts: tuple) -> list[int]:
    h = hashlib.sha256("/".join(str(p) for p in parts).encode("utf-8")).digest()
    return [int.from_bytes(h[i:i + 4], "little") for i in range(0, 16, 4)]


def substream(master_seed: int, *names) -> np.random.Generator:
    """Generator for the substream identified by ``names`` under ``master_seed``."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF] + _digest_words(names))
    return np.random.default_rng(ss)
