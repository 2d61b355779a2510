"""Counter-based random streams.

Every stochastic routine draws from Philox keyed by an explicit seed, and
batch ``i`` of a computation uses ``stream(seed, i)``, so results do not depend
on how batches are distributed over workers.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def make_rng(seed: int, *path: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *[int(p) for p in path]])
    return np.random.Generator(np.random.Philox(ss))


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("NARLAB_THREADS", "1")))
    except ValueError:
        return 1


def pmap(fn, items):
    """Ordered map, threaded up to NARLAB_THREADS workers."""
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
