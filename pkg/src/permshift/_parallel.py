"""Worker-count setting shared by the compiled kernels and thread pools."""

from concurrent.futures import ThreadPoolExecutor

import numba

_threads = 1


def set_threads(n: int) -> int:
    """Set the worker count (clamped to what numba was started with); return it."""
    global _threads
    _threads = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(_threads)
    return _threads


def get_threads() -> int:
    return _threads


def ordered_map(fn, items):
    """``map`` over a thread pool; results come back in input order."""
    items = list(items)
    if _threads == 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=_threads) as pool:
        return list(pool.map(fn, items))


set_threads(1)
