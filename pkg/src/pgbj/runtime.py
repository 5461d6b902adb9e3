"""In-process stand-in for the map/shuffle/reduce cluster."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
U = TypeVar("U")


class LocalRuntime:
    """Runs tasks on a pool of ``workers`` threads.

    Results always come back in task order, so callers that merge them
    sequentially are independent of scheduling.
    """

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError("worker_count must be >= 1")
        self.workers = workers
        self.timings: dict[str, float] = {}

    def map(self, fn: Callable[[T], U], tasks: Iterable[T]) -> list[U]:
        tasks = list(tasks)
        if self.workers == 1 or len(tasks) <= 1:
            return [fn(t) for t in tasks]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(fn, tasks))

    @contextmanager
    def phase(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start
