"""Kernel backend selection.

The compiled extension ``spdradial._kernels`` is used when it imports;
otherwise, or when the environment variable ``SPDRADIAL_PURE`` is set to a
non-empty value other than ``0``, the NumPy fallback in ``_purepy`` is used.
"""

import os

from . import _purepy

_force_pure = os.environ.get("SPDRADIAL_PURE", "") not in ("", "0")

if _force_pure:
    _impl = _purepy
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _purepy
        BACKEND = "python"

mgs_reorth = _impl.mgs_reorth
graded_log_svd = _impl.graded_log_svd
quantile_terms = _impl.quantile_terms

__all__ = ["BACKEND", "mgs_reorth", "graded_log_svd", "quantile_terms"]
