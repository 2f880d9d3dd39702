"""Numba switch.

Hot kernels are written once as plain Python loops and compiled with
``numba.njit`` unless ``SWARMSEC_DISABLE_NUMBA`` is set to a truthy value or
numba is missing, in which case callers use the vectorised numpy path.
"""
import os
import warnings

_FLAG = os.environ.get("SWARMSEC_DISABLE_NUMBA", "").strip().lower()

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None
    if _FLAG not in ("1", "true", "yes"):
        warnings.warn("numba is not installed - falling back to numpy kernels")

NUMBA_ENABLED = _njit is not None and _FLAG not in ("1", "true", "yes")


def njit(fn):
    """Compile ``fn`` in nopython mode when numba is usable, else return it unchanged."""
    if _njit is None:
        return fn
    return _njit(cache=True, fastmath=False)(fn)
