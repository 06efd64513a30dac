"""Thread-pool helpers honouring the ``CBLASSO_THREADS`` cap and seeded substreams."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

ENV_THREADS = "CBLASSO_THREADS"


def max_workers() -> int:
    """Worker count: ``CBLASSO_THREADS`` if set, otherwise the CPU count."""
    raw = os.environ.get(ENV_THREADS)
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        val = int(raw)
    except ValueError as exc:
        raise ValueError(f"{ENV_THREADS} must be a positive integer, got {raw!r}") from exc
    if val < 1:
        raise ValueError(f"{ENV_THREADS} must be a positive integer, got {raw!r}")
    return val


def spawn_generators(seed: int | None, count: int) -> list[np.random.Generator]:
    """Independent counter-based generators, one per task, derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.Philox(s)) for s in children]


def map_chunks(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """``[fn(x) for x in items]`` on up to :func:`max_workers` threads, order preserved."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
