"""Replicate blocks with fixed random streams, optionally spread over processes.

Each block of ``block`` replicates owns ``RngStream(master_seed, stream_base + b)``,
so results do not depend on the worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
import multiprocessing as mp

import numpy as np

from .stable_rng import RngStream


def block_sizes(m: int, block: int):
    return [min(block, m - s) for s in range(0, m, block)]


def _call(args):
    fn, n, stream, extra = args
    return fn(*extra, n, stream.generator())


def run_blocks(fn, m: int, master_seed: int, stream_base: int, *extra, block: int = 2000,
               workers: int = 1) -> np.ndarray:
    """Concatenate fn(*extra, n_b, generator_b) over replicate blocks along axis 0."""
    tasks = [(fn, n, RngStream(master_seed, stream_base + b), extra)
             for b, n in enumerate(block_sizes(int(m), int(block)))]
    if workers <= 1 or len(tasks) == 1:
        parts = [_call(t) for t in tasks]
    else:
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(max_workers=int(workers), mp_context=ctx) as ex:
            parts = list(ex.map(_call, tasks))
    return np.concatenate(parts, axis=0)
