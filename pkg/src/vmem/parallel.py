"""Worker-count control for embarrassingly parallel work (days, grid cells, MC reps).

The count comes from the VMEM_THREADS environment variable (default 1, i.e. run
in-process).  With more than one worker, tasks go to a process pool, so ``fn``
and its arguments must be picklable (module-level functions).
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

ENV_VAR = "VMEM_THREADS"


def n_workers(default: int = 1) -> int:
    raw = os.environ.get(ENV_VAR, "").strip()
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}")
    return n


def pmap(fn, items, workers: int | None = None) -> list:
    """Ordered map over ``items``; sequential when one worker is requested."""
    items = list(items)
    workers = n_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
