"""Fixed-order chunked evaluation.

Work is split into chunks whose boundaries depend only on the problem size,
never on the worker count, and partial results are combined with a fixed
pairwise tree. Totals are therefore bit-identical for any ``threads`` value.
"""

from __future__ import annotations

import math
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_threads() -> int:
    env = os.environ.get("MBQC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def chunk_bounds(total: int, size: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + size, total)) for lo in range(0, total, size)]


def ordered_map(func: Callable[[T], R], items: Sequence[T], threads: int | None = None) -> list[R]:
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def tree_reduce(values: Sequence[T], combine: Callable[[T, T], T]) -> T:
    """Pairwise reduction ``((v0+v1)+(v2+v3))+...`` in a fixed shape."""
    if not values:
        raise ValueError("nothing to reduce")
    level = list(values)
    while len(level) > 1:
        nxt = [combine(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def tree_sum(values: Sequence[float]) -> float:
    return tree_reduce([float(v) for v in values], lambda a, b: a + b)


def compensated_sum(values: Sequence[float]) -> float:
    return math.fsum(values)
