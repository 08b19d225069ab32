"""Optional numba acceleration.

Set ``MOURRELAB_DISABLE_NUMBA=1`` to force the pure-numpy kernels. The flag
is read once at import time; :func:`numba_enabled` reports the outcome.
"""

from __future__ import annotations

import os

_FLAG = "MOURRELAB_DISABLE_NUMBA"


def _flag_set() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _flag_set()


def njit(func):
    """Compile ``func`` in nopython mode, or return a placeholder if numba is absent."""
    if not HAVE_NUMBA:
        return None
    return _numba.njit(cache=True)(func)


def numba_enabled() -> bool:
    return USE_NUMBA


def set_threads(n: int) -> None:
    if HAVE_NUMBA:
        n = max(1, min(int(n), _numba.config.NUMBA_NUM_THREADS))
        _numba.set_num_threads(n)
