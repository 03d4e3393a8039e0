"""Deterministic parallel chunk map.

Worker count is capped by the HALFLINE_MAX_WORKERS environment variable.
Results are reassembled by chunk index, so output never depends on scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_ENV_VAR = "HALFLINE_MAX_WORKERS"


def max_workers() -> int:
    raw = os.environ.get(_ENV_VAR, "")
    if raw.strip():
        try:
            value = int(raw)
        except ValueError as exc:
            raise ValueError(f"{_ENV_VAR} must be an integer, got {raw!r}.") from exc
        if value < 1:
            raise ValueError(f"{_ENV_VAR} must be positive, got {value}.")
        return value
    return min(4, os.cpu_count() or 1)


def chunk_indices(total: int, chunk: int) -> list[tuple[int, int]]:
    if chunk < 1:
        raise ValueError("chunk size must be positive.")
    return [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]


def parallel_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Map fn over items with a bounded thread pool, preserving order."""
    workers = max_workers()
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
