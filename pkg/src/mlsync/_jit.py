"""Numba switch.

Hot kernels are decorated with :func:`njit` from this module.  When numba is
importable and ``MLSYNC_BACKEND`` is not ``numpy`` the decorator compiles
them; otherwise it returns the function untouched and the same source runs as
plain numpy/Python.
"""
import os

BACKEND_ENV = "MLSYNC_BACKEND"

_requested = os.environ.get(BACKEND_ENV, "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {_requested!r}")

try:
    if _requested == "numpy":
        raise ImportError
    import numba as _numba
except ImportError:
    _numba = None

USING_NUMBA = _numba is not None
BACKEND = "numba" if USING_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` with ``cache=True`` by default, or a no-op."""
    if USING_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func

