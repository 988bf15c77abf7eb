"""Thread-pool helpers for strip- and item-parallel raster work.

Determinism contract: results are assembled by index, and every unit of
work is a pure function of its inputs (noise strips address absolute RNG
counters), so outputs are byte-identical for any thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
U = TypeVar("U")


def effective_threads(threads: int | None) -> int:
    if threads is None or threads < 1:
        return max(1, os.cpu_count() or 1)
    return threads


def strip_bounds(n: int, threads: int, min_size: int = 64) -> list[tuple[int, int]]:
    """Split [0, n) into contiguous chunks, at most 4x threads of them."""
    if n <= 0:
        return []
    chunks = max(1, min(threads * 4, n // max(1, min_size)))
    edges = np.linspace(0, n, chunks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def map_strips(
    fn: Callable[[int, int], np.ndarray], n: int, threads: int = 1, min_size: int = 64
) -> np.ndarray:
    """Run fn(a, b) over row ranges covering [0, n) and vstack the results."""
    bounds = strip_bounds(n, effective_threads(threads), min_size)
    if len(bounds) <= 1 or effective_threads(threads) == 1:
        parts = [fn(a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=effective_threads(threads)) as pool:
            parts = list(pool.map(lambda ab: fn(*ab), bounds))
    return parts[0] if len(parts) == 1 else np.concatenate(parts, axis=0)


def tmap(fn: Callable[[T], U], items: Sequence[T] | Iterable[T], threads: int = 1) -> list[U]:
    """Order-preserving parallel map."""
    items = list(items)
    t = effective_threads(threads)
    if t == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=t) as pool:
        return list(pool.map(fn, items))
