"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
pure-Python ``_fallback`` module. Set ``WASSTIME_PURE_PYTHON=1`` to force the
fallback (useful for comparisons and for platforms without a compiler).
"""
from __future__ import annotations

import os

from . import _fallback

KERNEL_NONE = _fallback.KERNEL_NONE
KERNEL_LINEAR = _fallback.KERNEL_LINEAR
KERNEL_BOUNDED = _fallback.KERNEL_BOUNDED

_impl = _fallback
BACKEND = "python"
if os.environ.get("WASSTIME_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _fallback

lsap = _impl.lsap
transport_simplex = _impl.transport_simplex
interaction_sum = _impl.interaction_sum


def implementations() -> dict:
    """All importable kernel modules keyed by name (for tests and benchmarks)."""
    out = {"python": _fallback}
    try:
        from . import _kernels

        out["compiled"] = _kernels
    except ImportError:  # pragma: no cover
        pass
    return out
