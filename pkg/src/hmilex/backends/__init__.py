"""Kernel backend selection.

The env var HMILEX_BACKEND picks the evaluation kernels: "numba"
(default) or "numpy" (pure-numpy fallback, no JIT).  When numba is not
importable the fallback is selected automatically.
"""

import os

from .common import Tape, alloc_buffers, confidence_of

_requested = os.environ.get("HMILEX_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"HMILEX_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    from . import numpy_kernels as kernels
else:
    try:
        from . import numba_kernels as kernels
    except ImportError:
        if _requested == "numba":
            raise
        from . import numpy_kernels as kernels

BACKEND = kernels.NAME

__all__ = ["Tape", "alloc_buffers", "confidence_of", "kernels", "BACKEND"]
