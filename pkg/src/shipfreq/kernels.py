"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy implementation in ``_fallback`` is used. Setting the environment
variable ``SHIPFREQ_PURE_PYTHON=1`` forces the fallback.
"""

import importlib
import os

from . import _fallback

__all__ = ["BACKEND", "available_backends", "demean", "get_backend", "lambert_w"]


def _load_compiled():
    try:
        return importlib.import_module("shipfreq._kernels")
    except ImportError:
        return None


_compiled = None if os.environ.get("SHIPFREQ_PURE_PYTHON") else _load_compiled()


def available_backends():
    """Names of the importable backends, preferred first."""
    return (["compiled"] if _compiled is not None else []) + ["python"]


def get_backend(name=None):
    """Return the kernel module for ``name`` ('compiled' or 'python'), or the default."""
    if name is None:
        return _compiled if _compiled is not None else _fallback
    if name == "python":
        return _fallback
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


_impl = get_backend()
BACKEND = "compiled" if _impl is _compiled else "python"
lambert_w = _impl.lambert_w
demean = _impl.demean
