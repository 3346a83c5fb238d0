"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the NumPy fallback
is used.  Setting ``PC2_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("PC2_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

recurrence_table = _impl.recurrence_table
tensor_design = _impl.tensor_design

__all__ = ["BACKEND", "recurrence_table", "tensor_design"]
