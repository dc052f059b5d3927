"""Backend selection for the numeric inner loops.

The compiled extension is used when it was built; otherwise the numpy
implementation is selected at import. ``SQHHG_BACKEND=python`` forces the
fallback, ``SQHHG_BACKEND=compiled`` makes a missing extension an error.
"""
import os

from . import _kernels_py

_choice = os.environ.get("SQHHG_BACKEND", "auto").lower()
_compiled = None
if _choice != "python":
    try:
        from . import _kernels_c as _compiled
    except ImportError:
        if _choice == "compiled":
            raise
        _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py
BACKEND = "compiled" if _compiled is not None else "python"

lewenstein_sum = _impl.lewenstein_sum
mc_accumulate = _impl.mc_accumulate


def get_backend(name=None):
    """Return the kernel module for ``name`` ('compiled' or 'python'), default active."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def compiled_available():
    return _compiled is not None
