"""Numba-vs-numpy backend selection.

Hot kernels are compiled with numba unless the environment variable
``STOPSUM_NO_NUMBA=1`` is set (or numba is not importable), in which case the
same functions run as plain Python/numpy.  ``benchmarks/bench_convolution.py``
compares the two paths.
"""

import os

_DISABLED = os.environ.get("STOPSUM_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

if _DISABLED:
    NUMBA_ENABLED = False
else:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False


def jit_kernel(func):
    """Compile ``func`` with numba when enabled, else return it unchanged."""
    if NUMBA_ENABLED:
        from numba import njit

        return njit(cache=True)(func)
    return func
