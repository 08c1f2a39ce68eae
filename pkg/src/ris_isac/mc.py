"""Counter-based random streams and chunked Monte Carlo execution.

Trials are grouped in fixed-size chunks.  Chunk ``i`` of the experiment
identified by ``key`` always draws from
``SeedSequence(master_seed, spawn_key=(*key, i))``, so results depend only on
``(master_seed, key, trials, chunk_size)`` and never on how chunks are
scheduled across worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np


def stream(master_seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def chunk_sizes(trials: int, chunk_size: int) -> list[int]:
    full, rest = divmod(int(trials), int(chunk_size))
    return [chunk_size] * full + ([rest] if rest else [])


def run_chunked(
    fn: Callable[[np.random.Generator, int], np.ndarray],
    master_seed: int,
    key: Sequence[int],
    trials: int,
    chunk_size: int,
    threads: int = 1,
) -> np.ndarray:
    """Evaluate ``fn(rng, n)`` on every chunk and concatenate in chunk order."""
    sizes = chunk_sizes(trials, chunk_size)
    jobs = [(stream(master_seed, *key, i), n) for i, n in enumerate(sizes)]
    if not jobs:
        return np.empty(0)
    if threads <= 1 or len(jobs) == 1:
        parts = [fn(rng, n) for rng, n in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    return np.concatenate(parts)
