"""Counter-based random streams.

Every sample is drawn from its own Philox generator keyed by
``(seed, stream)`` with the counter positioned at the sample index, so a
sample depends only on ``(seed, stream, index)``.  Workers can take any
disjoint index ranges and the merged result is the same array.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

MASK64 = (1 << 64) - 1


def stream_id(*labels) -> int:
    """Stable 64-bit id for a named stream, e.g. ``stream_id("gue", n, k)``."""
    text = "\x1f".join(repr(x) for x in labels).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def generator(seed: int, stream: int, index: int) -> np.random.Generator:
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if index < 0:
        raise ValueError("sample index must be nonnegative")
    # counter word 0 advances within a sample; word 1 holds the index
    bitgen = np.random.Philox(key=seed | ((stream & MASK64) << 64), counter=(index & MASK64) << 64)
    return np.random.Generator(bitgen)


def split_range(start: int, stop: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, stop - start)) if stop > start else 1
    edges = np.linspace(start, stop, parts + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def map_indices(fn: Callable[[int, int], np.ndarray], start: int, stop: int, workers: int = 1) -> np.ndarray:
    """Evaluate ``fn(a, b)`` on disjoint index ranges and concatenate in order.

    ``fn`` must be a pure function of its index range; the result does not
    depend on ``workers``.
    """
    if workers <= 1 or stop - start < 2:
        return fn(start, stop)
    chunks = split_range(start, stop, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda ab: fn(*ab), chunks))
    return np.concatenate(parts, axis=0)
