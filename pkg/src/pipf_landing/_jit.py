"""Optional numba acceleration.

Set ``PIPF_LANDING_NO_NUMBA=1`` before import to force the pure-numpy path.
"""
import os

USE_NUMBA = os.environ.get("PIPF_LANDING_NO_NUMBA", "").strip().lower() not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if USE_NUMBA:
    def jit(*args, **kwargs):
        return _njit(*args, cache=True, nogil=True, **kwargs)
else:
    def jit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
