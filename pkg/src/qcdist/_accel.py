"""Acceleration backend selection for the hot kernels.

The numeric inner loops in :mod:`qcdist.kernels` are compiled with numba's
``@njit`` by default. Setting the environment variable ``QCDIST_PURE_NUMPY=1``
(before import) forces the plain-numpy code path: the same source runs
uncompiled. That path is slower but has no compiler dependency and is handy
when debugging kernel code.
"""

import os

ENV_FLAG = "QCDIST_PURE_NUMPY"


def _pure_requested() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


USING_NUMBA = False
if not _pure_requested():
    try:
        import numba  # noqa: F401

        USING_NUMBA = True
    except ImportError:
        USING_NUMBA = False

if USING_NUMBA:
    from numba import njit
else:

    def njit(*args, **kwargs):
        """Identity decorator standing in for numba.njit."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def py_func(fn):
    """Return the uncompiled version of a kernel.

    For a numba dispatcher this is its original Python function; in pure
    mode the kernel already is one.
    """
    return getattr(fn, "py_func", fn)
