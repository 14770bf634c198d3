"""Optional numba acceleration.

Hot loops are written once in a numba-compatible subset of Python and
compiled with ``njit`` when numba is importable.  Setting the environment
variable ``ATLASFLUCT_NO_NUMBA=1`` forces the pure-numpy code paths, which
is how the benchmark and the backend-equivalence tests exercise both.
"""
import os

try:
    import numba
    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the system TBB is too old for numba; avoid the import-time warning
        numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover - numba is the optional "fast" extra
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("ATLASFLUCT_NO_NUMBA", "0").lower() not in (
    "1", "true", "yes")


def optional_njit(*args, **kwargs):
    """``numba.njit`` when available, identity otherwise.

    The undecorated function stays reachable as ``.py_func`` either way.
    """
    def decorator(func):
        if HAVE_NUMBA:
            return numba.njit(*args, **kwargs)(func)
        func.py_func = func
        return func
    return decorator


def set_workers(n):
    """Set the numba thread count (no-op without numba)."""
    if HAVE_NUMBA and n is not None:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def default_workers():
    if HAVE_NUMBA:
        return numba.config.NUMBA_NUM_THREADS
    return os.cpu_count() or 1
