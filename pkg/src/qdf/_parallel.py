"""Order-preserving map over independent tasks, capped by ``QDF_THREADS``."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def max_workers() -> int:
    raw = os.environ.get("QDF_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def pmap(fn, items):
    items = list(items)
    n = min(max_workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
