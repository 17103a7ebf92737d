"""Kernel selection: compiled extension when importable, NumPy otherwise."""

from __future__ import annotations

import os

from . import _pycore

HAS_NATIVE = False
kernels = _pycore

try:
    from . import _core as _native
except ImportError:  # extension not built
    pass
else:
    kernels = _native
    HAS_NATIVE = True

BACKEND = "cython" if HAS_NATIVE else "numpy"


def get_kernels(name: str | None = None):
    """Kernel module by name ('cython', 'numpy') or the active default."""
    if name is None:
        return kernels
    if name == "numpy":
        return _pycore
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")


def thread_count() -> int:
    """Worker count for sweeps, from ``TMHOMOG_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("TMHOMOG_THREADS", "1")))
    except ValueError:
        return 1
