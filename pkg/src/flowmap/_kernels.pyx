# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled presence kernel.

Arithmetic per lattice point mirrors _kernels_py.flow_presence operation for
operation (and the extension is built with -ffp-contract=off), so results are
bit-identical to the pure backend.  Loops release the GIL for thread-parallel
map evaluation.
"""

import numpy as np

from libc.math cimport floor, fmax, fmin

BACKEND = "compiled"


cdef inline double _interp(const double* c, long n, double origin,
                           double inv_step, double x) nogil:
    cdef double u = (x - origin) * inv_step
    cdef double fi = floor(u)
    cdef double t
    cdef long idx
    fi = fmin(fmax(fi, 0.0), <double>(n - 2))
    t = u - fi
    t = fmin(fmax(t, 0.0), 1.0)
    idx = <long>fi
    return c[idx] + t * (c[idx + 1] - c[idx])


def flow_presence(double[::1] xs, double[::1] ys, double[::1] zs,
                  double[:, ::1] boxes,
                  double[::1] lat_cdf, long[::1] lat_off,
                  double[::1] lat_orig, double[::1] lat_inv,
                  double[::1] vert_cdf, long[::1] vert_off,
                  double[::1] vert_orig, double[::1] vert_inv,
                  double[::1] r_cdf, double r_origin, double r_inv,
                  double a_p, double b_p, double[:, ::1] out):
    """Multiply (1 - p_box) into out[:, iz] for every box of one flow."""
    cdef long n = xs.shape[0]
    cdef long nz = zs.shape[0]
    cdef long nb = boxes.shape[0]
    cdef long nr = r_cdf.shape[0]
    cdef double[::1] gk_z = np.empty(nz)
    cdef double[::1] gk1_z = np.empty(nz)

    cdef long k, i, iz
    cdef double x0, y0, ex, ey, lx, ly, box_len, llo, lhi, vlo, vhi, inv_len
    cdef double z, clo, chi
    cdef double dx, dy, t, u, alo, ahi, lint, along_f, s, one_minus_s
    cdef double blo, bhi, fk, fk1, lat_f, h, vf, p
    cdef const double* lat_k
    cdef const double* lat_k1
    cdef const double* vert_k
    cdef const double* vert_k1
    cdef long n_lat_k, n_lat_k1, n_vert_k, n_vert_k1
    cdef double lat_orig_k, lat_orig_k1, lat_inv_k, lat_inv_k1
    cdef double vert_orig_k, vert_orig_k1, vert_inv_k, vert_inv_k1

    with nogil:
        for k in range(nb):
            x0 = boxes[k, 0]
            y0 = boxes[k, 1]
            ex = boxes[k, 2]
            ey = boxes[k, 3]
            lx = boxes[k, 4]
            ly = boxes[k, 5]
            box_len = boxes[k, 6]
            llo = boxes[k, 7]
            lhi = boxes[k, 8]
            vlo = boxes[k, 9]
            vhi = boxes[k, 10]
            inv_len = 1.0 / box_len
            lat_k = &lat_cdf[lat_off[k]]
            n_lat_k = lat_off[k + 1] - lat_off[k]
            lat_k1 = &lat_cdf[lat_off[k + 1]]
            n_lat_k1 = lat_off[k + 2] - lat_off[k + 1]
            vert_k = &vert_cdf[vert_off[k]]
            n_vert_k = vert_off[k + 1] - vert_off[k]
            vert_k1 = &vert_cdf[vert_off[k + 1]]
            n_vert_k1 = vert_off[k + 2] - vert_off[k + 1]
            lat_orig_k = lat_orig[k]
            lat_orig_k1 = lat_orig[k + 1]
            lat_inv_k = lat_inv[k]
            lat_inv_k1 = lat_inv[k + 1]
            vert_orig_k = vert_orig[k]
            vert_orig_k1 = vert_orig[k + 1]
            vert_inv_k = vert_inv[k]
            vert_inv_k1 = vert_inv[k + 1]

            for iz in range(nz):
                z = zs[iz]
                clo = fmax(z - b_p, vlo)
                chi = fmin(z + b_p, vhi)
                gk_z[iz] = (_interp(vert_k, n_vert_k, vert_orig_k, vert_inv_k, chi)
                            - _interp(vert_k, n_vert_k, vert_orig_k, vert_inv_k, clo))
                gk1_z[iz] = (_interp(vert_k1, n_vert_k1, vert_orig_k1, vert_inv_k1, chi)
                             - _interp(vert_k1, n_vert_k1, vert_orig_k1, vert_inv_k1, clo))

            for i in range(n):
                dx = xs[i] - x0
                dy = ys[i] - y0
                t = dx * ex + dy * ey
                u = dx * lx + dy * ly
                alo = fmax(t - a_p, 0.0)
                ahi = fmin(t + a_p, box_len)
                lint = ahi - alo
                along_f = fmax(_interp(&r_cdf[0], nr, r_origin, r_inv, lint), 0.0)
                s = alo * inv_len
                s = fmin(fmax(s, 0.0), 1.0)
                one_minus_s = 1.0 - s
                blo = fmax(u - a_p, llo)
                bhi = fmin(u + a_p, lhi)
                fk = (_interp(lat_k, n_lat_k, lat_orig_k, lat_inv_k, bhi)
                      - _interp(lat_k, n_lat_k, lat_orig_k, lat_inv_k, blo))
                fk1 = (_interp(lat_k1, n_lat_k1, lat_orig_k1, lat_inv_k1, bhi)
                       - _interp(lat_k1, n_lat_k1, lat_orig_k1, lat_inv_k1, blo))
                lat_f = fmax(one_minus_s * fk + s * fk1, 0.0)
                h = along_f * lat_f
                if h == 0.0:
                    continue
                for iz in range(nz):
                    vf = fmax(one_minus_s * gk_z[iz] + s * gk1_z[iz], 0.0)
                    p = h * vf
                    out[i, iz] = out[i, iz] * (1.0 - p)
