"""Numba backend selection.

Hot numeric kernels in :mod:`acktrack.kernels` are compiled with numba's
``@njit`` when available.  Setting the environment variable
``ACKTRACK_NUMBA=0`` (or ``false``/``off``/``no``) before import forces the
pure-Python/numpy fallback, which runs the exact same code uncompiled.
Results are identical either way; only speed differs.  See
``benchmarks/bench_backends.py`` for a timing comparison.
"""

import os

_flag = os.environ.get("ACKTRACK_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _flag not in ("0", "false", "off", "no")

NUMBA_ACTIVE = False
if NUMBA_REQUESTED:
    try:
        from numba import njit as _numba_njit

        NUMBA_ACTIVE = True
    except ImportError:
        NUMBA_ACTIVE = False

if NUMBA_ACTIVE:

    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        return _numba_njit(*args, **kwargs)

else:

    def njit(*args, **kwargs):
        # Fallback: plain functions, ignoring jit options.
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def backend_name() -> str:
    return "numba" if NUMBA_ACTIVE else "numpy"
