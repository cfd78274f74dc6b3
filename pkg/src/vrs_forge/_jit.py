"""Optional numba acceleration for the numeric kernels.

Set ``VRS_FORGE_DISABLE_JIT=1`` to run every kernel as plain Python/numpy.
Both paths execute the same function bodies, so results agree to rounding.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("VRS_FORGE_DISABLE_JIT", "").strip().lower()
JIT_REQUESTED = _FLAG not in ("1", "true", "yes", "on")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

JIT_ENABLED = JIT_REQUESTED and _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if args and callable(args[0]) and len(args) == 1 and not kwargs:
        func = args[0]
        if JIT_ENABLED:
            return _numba.njit(cache=True)(func)
        return func

    def wrap(func):
        if JIT_ENABLED:
            kwargs.setdefault("cache", True)
            return _numba.njit(*args, **kwargs)(func)
        return func

    return wrap
