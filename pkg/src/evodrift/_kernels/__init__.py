"""Kernel backend selection.

The compiled Cython core is preferred when importable; otherwise the
pure-numpy fallback provides the identical API.  ``EVODRIFT_KERNELS`` forces
a backend: ``compiled``, ``fallback``, or ``auto`` (default).
"""

import os

_requested = os.environ.get("EVODRIFT_KERNELS", "auto")
if _requested not in ("auto", "compiled", "fallback"):
    raise ImportError(
        f"EVODRIFT_KERNELS must be auto, compiled, or fallback; "
        f"got {_requested!r}")

if _requested == "fallback":
    from . import fallback as _impl
    _backend = "fallback"
else:
    try:
        from . import _core as _impl
        _backend = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        from . import fallback as _impl
        _backend = "fallback"

distance_sums = _impl.distance_sums
gat_forward = _impl.gat_forward
gat_backward = _impl.gat_backward


def backend_name() -> str:
    """Which kernel implementation is active: 'compiled' or 'fallback'."""
    return _backend
