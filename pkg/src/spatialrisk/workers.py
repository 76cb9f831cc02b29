import logging
import os
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import TypeVar

from .errors import ConfigError

"""Worker pool shared by curve evaluation and Monte-Carlo replicates.

Tasks are gathered back into submission order, so results never depend on the worker count.
"""

THREADS_VARIABLE = "RISK_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def worker_count(default: int = 1) -> int:
    value = os.environ.get(THREADS_VARIABLE)
    if value is None or value.strip() == "":
        return default

    try:
        count = int(value)
    except ValueError as e:
        msg = f"{THREADS_VARIABLE} must be a positive integer, got '{value}'"
        raise ConfigError(msg) from e
    if count < 1:
        msg = f"{THREADS_VARIABLE} must be a positive integer, got {count}"
        raise ConfigError(msg)
    return count


def parallel_map(func: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    logging.debug(f"dispatching {len(items)} tasks to {workers} workers")
    results: list = [None] * len(items)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(func, item): index for index, item in enumerate(items)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
    return results
