"""Thread-count plumbing shared by the CLI and the acceptance runner."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numba


def thread_count() -> int:
    """Worker cap from TRIMAP_THREADS (default: all cores numba sees)."""
    cap = numba.config.NUMBA_NUM_THREADS
    raw = os.environ.get("TRIMAP_THREADS")
    if not raw:
        return cap
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"TRIMAP_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError("TRIMAP_THREADS must be a positive integer")
    return min(n, cap)


def configure_threads() -> int:
    """Apply TRIMAP_THREADS to numba; untouched when the variable is unset."""
    n = thread_count()
    if os.environ.get("TRIMAP_THREADS"):
        # the kernels here are serial; workqueue avoids probing for an optional TBB install
        numba.config.THREADING_LAYER = "workqueue"
        numba.set_num_threads(n)
    return n


def map_threads(fn, items):
    """``list(map(fn, items))`` on a thread pool of :func:`thread_count` workers.

    Only worthwhile for work that releases the GIL (the numba orbit kernel).
    """
    items = list(items)
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
