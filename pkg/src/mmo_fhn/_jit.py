"""Backend switch for the hot kernels.

Kernels are written once as plain loops over float64 scalars.  With the
``numba`` backend they are compiled with ``@njit(nogil=True, cache=True)``;
with the ``numpy`` backend the very same functions run in the interpreter
and the ensemble routines switch to vectorised numpy code.

Select the backend with ``MMO_FHN_BACKEND=numba|numpy`` (read at import).
``numba`` is the default whenever it can be imported.
"""
import os

_requested = os.environ.get("MMO_FHN_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"MMO_FHN_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    if _requested == "numpy":
        raise ImportError
    import numba as _nb
except ImportError:
    _nb = None

BACKEND = "numba" if _nb is not None else "numpy"
USE_NUMBA = _nb is not None


def njit(func):
    if _nb is None:
        return func
    return _nb.njit(nogil=True, cache=True)(func)
