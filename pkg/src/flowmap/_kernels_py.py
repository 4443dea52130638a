"""Pure-numpy presence kernel: the import-time fallback for the compiled one.

Every operation is elementwise per lattice point, in the same order as the
compiled kernel, so the two backends produce bit-identical results and any
chunking of the point set is value-preserving.
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"


def _interp_cdf(values: np.ndarray, origin: float, inv_step: float, x: np.ndarray) -> np.ndarray:
    """Linear interpolation on a uniform-grid CDF; clamps to the end values."""
    u = (x - origin) * inv_step
    i = np.floor(u)
    i = np.minimum(np.maximum(i, 0.0), float(values.size - 2))
    t = u - i
    t = np.minimum(np.maximum(t, 0.0), 1.0)
    idx = i.astype(np.int64)
    c0 = values[idx]
    c1 = values[idx + 1]
    return c0 + t * (c1 - c0)


def _interp_cdf_scalar(values: np.ndarray, origin: float, inv_step: float, x: float) -> float:
    u = (x - origin) * inv_step
    i = min(max(np.floor(u), 0.0), float(values.size - 2))
    t = min(max(u - i, 0.0), 1.0)
    idx = int(i)
    c0 = float(values[idx])
    c1 = float(values[idx + 1])
    return c0 + t * (c1 - c0)


def flow_presence(xs, ys, zs, boxes, lat_cdf, lat_off, lat_orig, lat_inv,
                  vert_cdf, vert_off, vert_orig, vert_inv,
                  r_cdf, r_origin, r_inv, a_p, b_p, out) -> None:
    """Multiply (1 - p_box) into out[:, iz] for every box of one flow.

    out has shape (len(xs), len(zs)) and should start at 1; after all flows
    the caller turns the product into a presence probability via 1 - out.
    """
    nb = boxes.shape[0]
    nz = zs.shape[0]
    for k in range(nb):
        x0, y0, ex, ey, lx, ly, box_len, llo, lhi, vlo, vhi = (float(v) for v in boxes[k])
        inv_len = 1.0 / box_len
        lat_k = lat_cdf[lat_off[k]:lat_off[k + 1]]
        lat_k1 = lat_cdf[lat_off[k + 1]:lat_off[k + 2]]
        vert_k = vert_cdf[vert_off[k]:vert_off[k + 1]]
        vert_k1 = vert_cdf[vert_off[k + 1]:vert_off[k + 2]]

        dx = xs - x0
        dy = ys - y0
        t = dx * ex + dy * ey
        u = dx * lx + dy * ly
        alo = np.maximum(t - a_p, 0.0)
        ahi = np.minimum(t + a_p, box_len)
        lint = ahi - alo
        along_f = np.maximum(_interp_cdf(r_cdf, r_origin, r_inv, lint), 0.0)
        s = alo * inv_len
        s = np.minimum(np.maximum(s, 0.0), 1.0)
        one_minus_s = 1.0 - s
        blo = np.maximum(u - a_p, llo)
        bhi = np.minimum(u + a_p, lhi)
        fk = (_interp_cdf(lat_k, lat_orig[k], lat_inv[k], bhi)
              - _interp_cdf(lat_k, lat_orig[k], lat_inv[k], blo))
        fk1 = (_interp_cdf(lat_k1, lat_orig[k + 1], lat_inv[k + 1], bhi)
               - _interp_cdf(lat_k1, lat_orig[k + 1], lat_inv[k + 1], blo))
        lat_f = np.maximum(one_minus_s * fk + s * fk1, 0.0)
        h = along_f * lat_f
        for iz in range(nz):
            z = float(zs[iz])
            clo = max(z - b_p, vlo)
            chi = min(z + b_p, vhi)
            gk = (_interp_cdf_scalar(vert_k, vert_orig[k], vert_inv[k], chi)
                  - _interp_cdf_scalar(vert_k, vert_orig[k], vert_inv[k], clo))
            gk1 = (_interp_cdf_scalar(vert_k1, vert_orig[k + 1], vert_inv[k + 1], chi)
                   - _interp_cdf_scalar(vert_k1, vert_orig[k + 1], vert_inv[k + 1], clo))
            vf = np.maximum(one_minus_s * gk + s * gk1, 0.0)
            p = h * vf
            out[:, iz] *= 1.0 - p
