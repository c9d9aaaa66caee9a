"""Kernel backend selection.

The compiled extension is used when importable; ``LEVYAVG_PURE_PYTHON=1``
forces the numpy fallback.
"""

import os
import warnings

from . import _fallback

if os.environ.get("LEVYAVG_PURE_PYTHON", "") not in ("", "0"):
    kernels = _fallback
    NAME = "python"
else:
    try:
        from . import _kernels as kernels

        NAME = "cython"
    except ImportError as exc:  # pragma: no cover - depends on the build
        warnings.warn(f"levyavg: compiled kernels unavailable ({exc}); using numpy fallback")
        kernels = _fallback
        NAME = "python"

__all__ = ["kernels", "NAME"]
