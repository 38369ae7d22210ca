"""Optional numba acceleration.

Hot loops are written once as plain Python over numpy arrays and compiled
with ``numba.njit`` when numba is importable.  Setting the environment
variable ``PYRAMID_MINING_DISABLE_NUMBA=1`` (before import) forces the
interpreted fallback, which is what the benchmark compares against.
"""
from __future__ import annotations

import os

DISABLE_ENV = "PYRAMID_MINING_DISABLE_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(DISABLE_ENV, "").strip().lower() not in {"1", "true", "yes", "on"}


try:
    if not _numba_requested():
        raise ImportError("numba disabled by environment")
    import numba as _numba
except ImportError:
    _numba = None

NUMBA_ENABLED = _numba is not None


def jit(func):
    """Compile ``func`` with numba in nopython mode, or return it unchanged."""
    if _numba is None:
        return func
    return _numba.njit(cache=False, nogil=True)(func)
