"""Optional numba acceleration.

Set ``INCONGRUITY_NO_NUMBA=1`` to force the pure-numpy kernels, e.g. when
numba is unavailable or when comparing the two paths.
"""
from __future__ import annotations

import os

_DISABLED = os.environ.get("INCONGRUITY_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit
except ImportError:
    _njit = None

HAVE_NUMBA = _njit is not None

if HAVE_NUMBA:
    from numba import config as _config
    USING_SVML = bool(getattr(_config, "USING_SVML", False))
else:
    USING_SVML = False


def njit(func):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    if _njit is None:
        return func
    return _njit(cache=True)(func)
