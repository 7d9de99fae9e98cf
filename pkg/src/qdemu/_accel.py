"""Numba switch.

Hot kernels in :mod:`qdemu.kernels` come in two flavours: a numba ``@njit``
version and a pure-numpy version. The numba path is used when numba imports
and ``QDEMU_DISABLE_NUMBA`` is unset (or ``0``).
"""
import os


def _disabled() -> bool:
    flag = os.environ.get("QDEMU_DISABLE_NUMBA", "").strip().lower()
    return flag not in ("", "0", "false", "no")


DISABLED_BY_ENV = _disabled()

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not DISABLED_BY_ENV


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise.

    Always compiles when numba exists (even if disabled by env) so the
    benchmark can compare both paths in one process.
    """
    kwargs.setdefault("cache", True)
    if not HAS_NUMBA:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda fn: fn
    return numba.njit(*args, **kwargs)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
