"""Per-replicate seeds and an order-independent replicate runner."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np


def child_seed(seed: int | None, stratum: int, index: int) -> np.random.SeedSequence:
    """Seed of replicate ``index`` in ``stratum``; independent of run order."""
    return np.random.SeedSequence(entropy=seed, spawn_key=(int(stratum), int(index)))


def run_replicates(fn: Callable, args: Sequence, workers: int = 1, chunksize: int = 16) -> list:
    """``[fn(a) for a in args]``, optionally over a process pool.

    Results come back in input order, so any reduction over them is the
    same whatever the worker count.
    """
    if workers <= 1 or len(args) < 2:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args, chunksize=chunksize))
