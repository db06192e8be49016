"""
Helper functions shared by the checkers.

- `parallel_map` fans work out over a thread pool and returns results in
  input order.
- `derive_rng` gives each unit of work its own seeded generator, so results
  do not depend on how work is split across threads.
- `elapsed_ms` measures wall time for report fields.
"""

import random
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

from .config import logger

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int) -> List[R]:
    """
    Apply `fn` to every item, optionally on a thread pool.

    Args:
        fn (Callable): A pure function of one item.
        items (Sequence): Work items.
        threads (int): Worker count; 1 runs inline.

    Returns:
        List: `fn(item)` for each item, in the order of `items`.
    """
    if threads <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    logger.debug("Fanning %d work items out over %d threads.", len(items), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def derive_rng(seed: int, index: int) -> random.Random:
    """
    Independent generator for work unit `index` of a run seeded with `seed`.

    Args:
        seed (int): Run seed.
        index (int): Position of the unit of work (sample number, worker chunk, ...).

    Returns:
        random.Random: A generator whose stream depends only on (seed, index).
    """
    return random.Random(f"{seed}:{index}")


def started_at() -> float:
    return time.monotonic()


def elapsed_ms(start: float) -> int:
    return int((time.monotonic() - start) * 1000)
