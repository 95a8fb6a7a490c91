"""Small shared helpers: thread map, per-cell RNG streams, grid parsing."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def pmap(fn, items, workers: int = 1) -> list:
    """Map fn over items, optionally on a thread pool; order is preserved.

    The heavy kernels release the GIL, so threads give real parallelism while
    keeping results addressable by index (hence deterministic aggregation).
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def spawn_rng(master_seed: int, *cell) -> np.random.Generator:
    """Independent generator for one work cell, derived by counter-based split."""
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=cell))


def spawn_seed(master_seed: int, *cell) -> int:
    """Derived 64-bit integer seed for APIs that take a plain seed."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=cell)
    return int(ss.generate_state(1, np.uint64)[0])


def parse_beta_grid(spec: str) -> np.ndarray:
    """Parse 'START:STOP:STEP' into an ascending inclusive grid."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError("beta grid must look like START:STOP:STEP")
    start, stop, step = (float(x) for x in parts)
    if step <= 0 or start >= stop:
        raise ValueError("beta grid needs step > 0 and start < stop")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)
