"""Order-preserving parallel map capped by ``SCENERY_LAB_THREADS``."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "SCENERY_LAB_THREADS"


def thread_count() -> int:
    """Worker cap from the environment (default: CPU count, at least 1)."""
    raw = os.environ.get(ENV_VAR)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def pmap(fn, items):
    """``list(map(fn, items))`` with results in input order.

    Workers never share RNG state: callers derive per-item seeds from the
    item index, so results do not depend on the thread count.
    """
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
