"""Kernel backend selection: compiled extension when available, numpy fallback
otherwise.  Set FLOWMAP_PURE_KERNELS=1 to force the fallback."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _kernels_py

_compiled = None
if os.environ.get("FLOWMAP_PURE_KERNELS", "0") in ("", "0"):
    try:
        from . import _kernels as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None

_backend = _compiled if _compiled is not None else _kernels_py


def backend_name() -> str:
    return _backend.BACKEND


@dataclass(frozen=True)
class FlowTables:
    """Per-flow arrays consumed by the presence kernel.

    boxes rows: x0, y0, ex, ey, lx, ly, length, lat_lo, lat_hi, vert_lo,
    vert_hi.  Window CDFs are concatenated with offsets; all CDF arrays end
    at exactly 1.
    """

    boxes: np.ndarray
    lat_cdf: np.ndarray
    lat_off: np.ndarray
    lat_orig: np.ndarray
    lat_inv: np.ndarray
    vert_cdf: np.ndarray
    vert_off: np.ndarray
    vert_orig: np.ndarray
    vert_inv: np.ndarray
    r_cdf: np.ndarray
    r_origin: float
    r_inv: float


def flow_presence(xs: np.ndarray, ys: np.ndarray, zs: np.ndarray, tables: FlowTables,
                  half_lateral: float, half_vertical: float, out: np.ndarray,
                  backend=None) -> None:
    """Multiply (1 - p_box) for all boxes of one flow into out (n, nz)."""
    b = backend if backend is not None else _backend
    b.flow_presence(xs, ys, zs, tables.boxes,
                    tables.lat_cdf, tables.lat_off, tables.lat_orig, tables.lat_inv,
                    tables.vert_cdf, tables.vert_off, tables.vert_orig, tables.vert_inv,
                    tables.r_cdf, tables.r_origin, tables.r_inv,
                    half_lateral, half_vertical, out)


def available_backends() -> dict:
    """Backend modules by name (for parity tests and benchmarks)."""
    out = {"pure": _kernels_py}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out
