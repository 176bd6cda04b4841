"""Counter-based random streams for reproducible, order-independent Monte Carlo.

Paths are drawn in fixed-size blocks; block i is generated from a Philox
generator keyed by (seed, block_start), so the ensemble is bit-identical no
matter how blocks are scheduled or how many there are.
"""

from __future__ import annotations

import numpy as np

BLOCK = 4096


def block_starts(n_paths: int) -> range:
    return range(0, n_paths, BLOCK)


def block_rng(seed: int, block_start: int) -> np.random.Generator:
    """Generator for the paths [block_start, block_start+BLOCK)."""
    key = np.array([seed, block_start], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
