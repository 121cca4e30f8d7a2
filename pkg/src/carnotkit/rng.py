"""Deterministic, shardable random streams.

Every Monte-Carlo loop in the toolkit draws its samples in fixed-size shards.
Shard ``k`` of a computation seeded with ``seed`` always uses the Philox
stream keyed by ``(seed, stream, k)``, so results do not depend on how many
workers process the shards.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

SHARD_SIZE = 1 << 16

T = TypeVar("T")


def generator(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for the stream ``(seed, *stream)``."""
    if seed < 0:
        raise ValueError("seeds must be non-negative")
    ss = np.random.SeedSequence([int(seed), *(int(s) for s in stream)])
    return np.random.Generator(np.random.Philox(ss))


def shard_sizes(n: int, shard_size: int = SHARD_SIZE) -> list[int]:
    full, rest = divmod(int(n), shard_size)
    return [shard_size] * full + ([rest] if rest else [])


def map_shards(
    fn: Callable[[np.random.Generator, int], T],
    n: int,
    seed: int,
    stream: int = 0,
    workers: int = 1,
    shard_size: int = SHARD_SIZE,
) -> list[T]:
    """Apply ``fn(rng, size)`` to every shard; results come back in shard order."""
    sizes = shard_sizes(n, shard_size)
    jobs = [(generator(seed, stream, k), size) for k, size in enumerate(sizes)]
    if workers <= 1 or len(jobs) <= 1:
        return [fn(rng, size) for rng, size in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def stable_sum(parts: Sequence[float]) -> float:
    """Sum in fixed order (``math.fsum`` is order independent and exact)."""
    return math.fsum(float(p) for p in parts)
