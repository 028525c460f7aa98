"""Shared plumbing: replicate-keyed RNG streams and ordered thread mapping."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

# Stream tags keep RNG draws from colliding when the same user seed is reused
# across different operations.  A generator is a pure function of
# (seed, stream, index), so replicate results do not depend on execution
# order or worker count.
STREAM_PERMUTATION = 1
STREAM_SUBSAMPLE = 2
STREAM_BOOTSTRAP = 3
STREAM_SPLIT = 4
STREAM_KFOLD = 5
STREAM_SCCA_INIT = 6
STREAM_SYNTH_NULL = 7
STREAM_SYNTH_LATENT = 8
STREAM_SYNTH_PLANTED = 9
STREAM_POPULATION_MC = 10


def replicate_rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Generator keyed by (seed, stream, replicate index)."""
    return np.random.default_rng((int(seed), int(stream), int(index)))


def parallel_map(fn, items, threads: int = 1) -> list:
    """Map preserving input order; threads <= 1 runs inline."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(fn, items))
