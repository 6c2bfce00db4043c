"""Order-preserving serial or threaded execution of independent work items."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def coerce_jobs(jobs: int, item_count: int) -> int:
    """Normalize a requested worker count (0 = one per CPU)."""
    value = int(jobs)
    if value < 0:
        raise ValueError("jobs must be >= 0")
    if item_count <= 0:
        return 1
    if value == 0:
        cpu_count = os.cpu_count() or 1
        return max(1, min(cpu_count, item_count))
    return min(value, item_count)


def run_jobs(items: Sequence[T], jobs: int, worker: Callable[[T], R]) -> list[R]:
    """Run ``worker`` over ``items`` and return results in input order."""
    workers = coerce_jobs(jobs, len(items))
    if workers == 1 or len(items) <= 1:
        return [worker(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(worker, item) for item in items]
        return [future.result() for future in futures]
