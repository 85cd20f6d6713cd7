"""Seed derivation and counter-based random streams."""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seeds(*entropy: int, n: int = 1) -> list[int]:
    """``n`` independent 64-bit seeds from a tuple of non-negative integers."""
    ss = np.random.SeedSequence([int(e) & MASK64 for e in entropy])
    return [int(s) for s in ss.generate_state(n, dtype=np.uint64)]


def counter_stream(seed: int, counter: int) -> np.random.Generator:
    """Philox stream keyed on (seed, counter); same key, same numbers."""
    key = ((int(seed) & MASK64) << 64) | (int(counter) & MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def generator(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & MASK64)
