"""Deterministic RNG streams derived from a single master seed."""

from __future__ import annotations

import numpy as np

# role indices for spawn keys, so streams never collide across components
ROLE_ENV_INIT = 0
ROLE_ENV_STEP = 1
ROLE_OBSERVE = 2
ROLE_POLICY = 3
ROLE_NET_INIT = 4
ROLE_REPLAY = 5


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key...); same inputs, same stream."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)
