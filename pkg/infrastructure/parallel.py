# -*- coding: utf-8 -*-
import logging
import os
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional

logger = logging.getLogger(__name__)

THREADS_ENV = "HDQR_THREADS"


def resolve_workers(requested: Optional[int] = None) -> int:
    """Worker count from an explicit request, else $HDQR_THREADS, else 1."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning(f"Ignoring non-integer {THREADS_ENV}={env!r}")
    return 1


def run_parallel(fn: Callable, items: Iterable, workers: int = 1, threads: bool = False) -> List:
    """
    Maps ``fn`` over ``items`` and returns results in input order.

    Args:
        fn: picklable callable (module-level function or functools.partial).
        items: work items.
        workers: pool size; 1 runs serially in-process.
        threads: use a thread pool instead of processes (numpy-bound work).
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    pool_cls = ThreadPoolExecutor if threads else ProcessPoolExecutor
    with pool_cls(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
