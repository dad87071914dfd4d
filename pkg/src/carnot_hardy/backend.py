"""Kernel backend selection.

The compiled extension is used when it imports; ``CARNOT_HARDY_PURE=1``
forces the numpy fallback. ``use_backend`` switches at runtime (benchmarks
and the cross-backend tests rely on it).
"""

from __future__ import annotations

import os

import numpy as np

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_active = _fallback if (_compiled is None or os.environ.get("CARNOT_HARDY_PURE") == "1") else _compiled


def compiled_available() -> bool:
    return _compiled is not None


def backend_name() -> str:
    return "compiled" if _active is _compiled else "fallback"


def use_backend(name: str) -> None:
    global _active
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        _active = _compiled
    elif name == "fallback":
        _active = _fallback
    else:
        raise ValueError(f"unknown backend {name!r}")


def jet_mul(a, b, ti, tj, tk, ncoef):
    if a.dtype == np.float64 and b.dtype == np.float64:
        return _active.jet_mul(np.ascontiguousarray(a), np.ascontiguousarray(b), ti, tj, tk, ncoef)
    return _fallback.jet_mul(a, b, ti, tj, tk, ncoef)


def neumaier_dot(w, g, s=0.0, comp=0.0):
    return _active.neumaier_dot(
        np.ascontiguousarray(w, dtype=np.float64), np.ascontiguousarray(g, dtype=np.float64), s, comp
    )
