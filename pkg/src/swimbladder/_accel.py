"""Numba availability probe and kernel-path selection.

Hot kernels in :mod:`swimbladder.kernels` exist in two versions: a numba
``@njit`` loop and a vectorized pure-numpy fallback.  The numba path is used
when numba imports cleanly, unless the environment variable
``SWIMBLADDER_NO_NUMBA`` is set to 1/true/yes, which forces the numpy path
(useful for debugging and for benchmarking the two against each other).
"""

import os

_DISABLED = os.environ.get("SWIMBLADDER_NO_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

if not _DISABLED:
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA

if not USE_NUMBA:

    def njit(*args, **kwargs):  # noqa: D103 - decorator stub, numpy path only
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
