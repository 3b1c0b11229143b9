"""Optional numba acceleration.

Kernels are written in the numba-compatible subset of Python/numpy and
decorated with :func:`njit` from this module. Setting ``MODEST_DISABLE_NUMBA=1``
(or running without numba installed) makes the decorator a no-op, so the
same kernels execute as plain numpy code. Both paths share the integer RNG,
so they produce bit-identical results.
"""

import os

import numpy as np

_DISABLED = os.environ.get("MODEST_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"


def njit(fn=None, **kwargs):
    """``numba.njit(cache=True, nogil=True)`` or identity, per backend."""

    def wrap(f):
        if not HAS_NUMBA:
            return f
        opts = {"cache": True, "nogil": True}
        opts.update(kwargs)
        return numba.njit(**opts)(f)

    if fn is not None:
        return wrap(fn)
    return wrap


def quiet_overflow():
    """Silence uint64 wraparound warnings on the interpreted path.

    The RNG relies on modular uint64 arithmetic; numpy scalars wrap correctly
    but warn about it. Compiled kernels never warn.
    """
    return np.errstate(over="ignore")
