"""Numba switch for the hot kernels.

Set ``HIFLOC_NUMBA=0`` before import to run every kernel through its
pure-numpy fallback. Numba is used by default when importable.
"""
import os

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("HIFLOC_NUMBA", "1").lower() not in ("0", "false", "no", "off")


def njit(func):
    """Compile ``func`` in nopython mode with on-disk caching when numba is available."""
    if not HAS_NUMBA:
        return func
    return numba.njit(cache=True)(func)
