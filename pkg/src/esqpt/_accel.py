"""JIT switch.

Hot kernels are compiled with numba when it is importable and the
environment variable ``ESQPT_DISABLE_JIT`` is unset (or ``0``). Otherwise the
pure-numpy implementations in :mod:`esqpt.kernels` are used.
"""
import os

_flag = os.environ.get("ESQPT_DISABLE_JIT", "0").strip().lower()
JIT_REQUESTED = _flag in ("", "0", "false", "no")

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

USE_JIT = JIT_REQUESTED and HAS_NUMBA


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAS_NUMBA:
        import numba

        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return numba.njit(*args, **kwargs)

    def deco(fn):
        return fn

    if args and callable(args[0]):
        return args[0]
    return deco
