"""Global runtime policy: element precision and worker threads.

All tensors in this package are plain numpy arrays.  The element type is
selected globally: ``f32`` (default) for speed, ``f64`` for verification.
Numerical tolerances throughout the test and verify suites are stated per
mode.  Thread count controls the optional deterministic parallel paths
(independent direction scans / per-agent forwards); results are bitwise
identical for any thread count because each work unit is independent and
merge order is fixed.
"""

from __future__ import annotations

import contextlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_DTYPES = {"f32": np.float32, "f64": np.float64}

_state = {"precision": "f32", "threads": 1}
_pool: ThreadPoolExecutor | None = None


def set_precision(mode: str) -> None:
    if mode not in _DTYPES:
        raise ValueError(f"unknown precision mode {mode!r}; expected one of {sorted(_DTYPES)}")
    _state["precision"] = mode


def get_precision() -> str:
    return _state["precision"]


def get_dtype() -> np.dtype:
    return np.dtype(_DTYPES[_state["precision"]])


@contextlib.contextmanager
def use_precision(mode: str):
    old = _state["precision"]
    set_precision(mode)
    try:
        yield
    finally:
        _state["precision"] = old


def set_threads(n: int) -> None:
    global _pool
    if n < 1:
        raise ValueError("thread count must be >= 1")
    if n != _state["threads"] and _pool is not None:
        _pool.shutdown(wait=True)
        _pool = None
    _state["threads"] = int(n)


def get_threads() -> int:
    return _state["threads"]


def map_ordered(fn, items):
    """Apply ``fn`` over ``items`` and return results in input order.

    Uses the shared thread pool when more than one worker is configured.
    Each item must be an independent work unit; ordering of the returned
    list (not completion order) is what downstream reductions consume, so
    results do not depend on the thread count.
    """
    global _pool
    items = list(items)
    if _state["threads"] == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    if _pool is None:
        _pool = ThreadPoolExecutor(max_workers=_state["threads"])
    return list(_pool.map(fn, items))
