"""Backend switch for the hot kernels.

``CURVESOLVE_NUMBA=0`` forces the pure-numpy path; anything else uses numba
when it is importable.
"""
from __future__ import annotations

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a soft dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("CURVESOLVE_NUMBA", "1") != "0"


def njit(fn):
    """``numba.njit(cache=True)`` when the numba backend is active, identity otherwise."""
    if USE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
