"""Reproducible random streams keyed by (master seed, block index).

Paths are generated in fixed-size blocks; every block owns an independent
PCG64 stream derived from ``SeedSequence(master_seed, spawn_key=(block,))``.
The partition of blocks among workers therefore never changes the numbers.
"""
from __future__ import annotations

import numpy as np

DEFAULT_BLOCK_SIZE = 1024


def block_stream(master_seed: int, block: int, *extra: int) -> np.random.Generator:
    """Generator for one block; ``extra`` keys separate unrelated uses of a seed."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(block), *map(int, extra)))
    return np.random.Generator(np.random.PCG64(ss))


def block_ranges(n_items: int, block_size: int = DEFAULT_BLOCK_SIZE) -> list[tuple[int, int, int]]:
    """Split ``range(n_items)`` into ``(block_index, start, stop)`` triples."""
    if block_size < 1:
        raise ValueError("block_size must be positive")
    return [
        (b, start, min(start + block_size, n_items))
        for b, start in enumerate(range(0, n_items, block_size))
    ]


def deal(blocks: list, workers: int) -> list[list]:
    """Round-robin assignment of blocks to workers (assignment never affects values)."""
    workers = max(1, int(workers))
    return [blocks[i::workers] for i in range(workers) if blocks[i::workers]]
