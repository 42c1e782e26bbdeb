"""
Per-trial random streams and chunked trial execution.

Every trial draws from its own generator keyed by ``(seed, experiment,
trial)``. Trials are grouped into fixed-size chunks whose boundaries do not
depend on the worker count, and chunk outputs are concatenated in chunk
order, so serial and parallel runs produce bit-identical results.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np

CHUNK_SIZE = 250


def experiment_key(name: str) -> int:
    return zlib.crc32(name.encode("ascii"))


def trial_rng(seed: int, experiment: str, trial: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), experiment_key(experiment), int(trial)])


def chunks(n_trials: int, size: int = CHUNK_SIZE) -> list[tuple[int, int]]:
    return [(a, min(a + size, n_trials)) for a in range(0, n_trials, size)]


def run_chunked(
    fn: Callable[[int, int], dict[str, np.ndarray]], n_trials: int, workers: int = 1
) -> dict[str, np.ndarray]:
    """Run ``fn(start, stop)`` over all chunks and concatenate the outputs per key.

    ``fn`` must be picklable when ``workers > 1``.
    """
    spans = chunks(n_trials)
    if workers > 1 and len(spans) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, *zip(*spans)))
    else:
        parts = [fn(a, b) for a, b in spans]
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}
