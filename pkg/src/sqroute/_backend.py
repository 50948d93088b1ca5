"""Pick the compiled kernels when available, the numpy fallback otherwise."""
from __future__ import annotations

import os

if os.environ.get("SQROUTE_PURE", "") not in ("", "0"):
    from . import _fallback as kernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _fallback as kernels
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
