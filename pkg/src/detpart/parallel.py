"""Fork-join helpers with schedule-independent results.

Work is expressed as tasks over disjoint index ranges whose results land in
disjoint output slots, so any interleaving produces the same arrays; the
thread count only affects wall-clock time. Nested calls from inside a worker
run inline (same result, no deadlock), since chunk boundaries never depend
on where the work executes.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

_lock = threading.Lock()
_num_threads = 1
_pool: ThreadPoolExecutor | None = None
_pool_size = 0
_tls = threading.local()


def _in_worker() -> bool:
    return getattr(_tls, "in_worker", False)


def _wrap(fn):
    def run(*args):
        _tls.in_worker = True
        try:
            return fn(*args)
        finally:
            _tls.in_worker = False

    return run


def set_num_threads(t: int) -> None:
    global _num_threads
    if t < 1:
        raise ValueError("thread count must be >= 1")
    with _lock:
        _num_threads = t


def get_num_threads() -> int:
    return _num_threads


def _ensure_pool(t: int) -> ThreadPoolExecutor:
    global _pool, _pool_size
    with _lock:
        if _pool is None or _pool_size != t:
            if _pool is not None:
                _pool.shutdown(wait=True)
            _pool = ThreadPoolExecutor(max_workers=t, thread_name_prefix="detpart")
            _pool_size = t
        return _pool


def run_range(n: int, task: Callable[[int, int], None], *, grain: int = 4096) -> None:
    """Invoke task(lo, hi) over a fixed chunking of range(n).

    The chunk boundaries depend only on n and grain, never on the thread
    count; small inputs and single-thread runs execute inline.
    """
    if n <= 0:
        return
    t = _num_threads
    if t == 1 or n <= grain or _in_worker():
        task(0, n)
        return
    chunks = min(4 * t, -(-n // grain))
    if chunks <= 1:
        task(0, n)
        return
    step = -(-n // chunks)
    pool = _ensure_pool(t)
    wrapped = _wrap(task)
    futures = [pool.submit(wrapped, lo, min(n, lo + step)) for lo in range(0, n, step)]
    for f in futures:
        f.result()


def run_tasks(tasks: Sequence[Callable[[], object]]) -> list:
    """Run independent callables, returning results in input order."""
    if not tasks:
        return []
    t = _num_threads
    if t == 1 or len(tasks) == 1 or _in_worker():
        return [fn() for fn in tasks]
    pool = _ensure_pool(t)
    futures = [pool.submit(_wrap(fn)) for fn in tasks]
    return [f.result() for f in futures]
