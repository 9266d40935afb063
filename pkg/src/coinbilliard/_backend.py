"""JIT backend selection.

Set ``COINBILLIARD_NUMBA=0`` to run the pure numpy path: scalar kernels then
execute as ordinary Python and batch kernels use vectorized numpy.
"""

import os

_flag = os.environ.get("COINBILLIARD_NUMBA", "1").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and _flag not in ("0", "false", "no", "off")

if USE_NUMBA:
    from numba import njit, prange
else:

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def deco(fn):
            return fn

        return deco

    prange = range


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
