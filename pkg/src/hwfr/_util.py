"""Seed derivation and an order-preserving thread map."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = "HWFR_THREADS"


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 63-bit seed for the stream identified by ``(seed, *keys)``."""
    ss = np.random.SeedSequence([int(seed)] + [int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else 1
    return max(int(threads), 1)


def pmap(func, items, threads: int | None = None) -> list:
    """``[func(x) for x in items]``, optionally on a thread pool; order is kept."""
    items = list(items)
    threads = resolve_threads(threads)
    if threads == 1 or len(items) < 2:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
