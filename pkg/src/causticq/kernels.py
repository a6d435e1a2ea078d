"""Backend selection for the hot loops.

The Cython extension is preferred; the pure-Python module is used when the
extension is unavailable or ``CAUSTICQ_PURE_PYTHON`` is set to a true value.
"""
import os

from . import _pykernels

_force_python = os.environ.get("CAUSTICQ_PURE_PYTHON", "").lower() in ("1", "true", "yes")

if _force_python:
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

flow = _impl.flow
shoot = _impl.shoot

__all__ = ["BACKEND", "flow", "shoot"]
