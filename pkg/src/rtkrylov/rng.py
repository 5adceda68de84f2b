"""Counter-based random streams.

Every random draw in the package goes through :func:`make_rng`, which keys a
Philox generator with ``(seed, *stream)``. Realization ``r`` of an ensemble
uses ``make_rng(base_seed, r)`` so the numbers it sees do not depend on how
many other realizations ran before it, or on which worker ran it.
"""

from __future__ import annotations

import numpy as np


def derive_seed(seed: int, *stream: int) -> np.random.SeedSequence:
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(derive_seed(seed, *stream)))
