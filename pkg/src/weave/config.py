"""Enumeration budgets and seeded randomness."""

from __future__ import annotations

import os

import numpy as np

DEFAULT_BUDGET = 10**8
BUDGET_ENV = "WEAVE_BUDGET"


def budget(override: int | None = None) -> int:
    """Return the enumeration cap: explicit override, then $WEAVE_BUDGET, then the default."""
    if override is not None:
        return int(override)
    raw = os.environ.get(BUDGET_ENV)
    if raw:
        return int(float(raw))
    return DEFAULT_BUDGET


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based stream: the same (seed, keys) always yields the same generator,
    independent of how many other streams were drawn before it."""
    seq = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(seq)


def child_seed(seed: int, *keys: int) -> int:
    """Derive a 63-bit integer seed for handing to another seeded component."""
    seq = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0]) >> 1
