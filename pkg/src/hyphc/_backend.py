"""Kernel backend selection.

Hot loops exist twice: a numba ``@njit`` version and a pure-numpy version.
``HYPHC_BACKEND=numpy`` forces the numpy path; otherwise numba is used when
it imports. The flag is read once, at import time.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

HAVE_NUMBA = numba is not None
BACKEND = os.environ.get("HYPHC_BACKEND", "numba").strip().lower()
if BACKEND not in ("numba", "numpy"):
    raise ImportError(f"HYPHC_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}")
USE_NUMBA = HAVE_NUMBA and BACKEND == "numba"


def njit(func):
    """``numba.njit(cache=True)`` when numba is installed, identity otherwise.

    Without numba the decorated function still runs, as slow interpreted
    Python; the dispatchers never route to it in that case.
    """
    if numba is None:
        return func
    return numba.njit(cache=True, nogil=True)(func)
