"""Numba switch.

Set ``IRGS_NUMBA=0`` before import to run every kernel through its pure-numpy
path. ``IRGS_THREADS`` caps numba's thread pool.
"""
import os

_flag = os.environ.get("IRGS_NUMBA", "1").strip().lower()
USE_NUMBA = _flag not in ("0", "false", "no", "off")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None
    USE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def set_threads_from_env():
    n = os.environ.get("IRGS_THREADS")
    if n is None or numba is None:
        return
    try:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
    except ValueError:
        pass
