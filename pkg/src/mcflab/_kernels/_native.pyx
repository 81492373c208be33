# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: curvature-motion stepping, Godunov reinitialization,
and the noncollapsing pair extrema.  Semantics match _fallback.py."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY

cnp.import_array()


cdef inline Py_ssize_t _wrap_clip(Py_ssize_t i, Py_ssize_t n, bint wrap) nogil:
    if wrap:
        if i < 0:
            return i + n
        if i >= n:
            return i - n
        return i
    if i < 0:
        return 0
    if i >= n:
        return n - 1
    return i


cdef inline double _band_cutoff(double s, double beta, double gamma) nogil:
    if s <= beta:
        return 1.0
    if s >= gamma:
        return 0.0
    return ((s - gamma) * (s - gamma) * (2.0 * s + gamma - 3.0 * beta)
            / ((gamma - beta) * (gamma - beta) * (gamma - beta)))


def curvature_motion_step(double[:, :, ::1] u, int[:, ::1] idx,
                          double h, double dt, double eps2, wrap,
                          double beta, double gamma):
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1], nz = u.shape[2]
    cdef Py_ssize_t m = idx.shape[0]
    cdef bint wx = bool(wrap[0]), wy = bool(wrap[1]), wz = bool(wrap[2])
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t q, i, j, k, ip, im, jp, jm, kp, km
    cdef double c, uxp, uxm, uyp, uym, uzp, uzm, ux, uy, uz
    cdef double uxx, uyy, uzz, uxy, uxz, uyz, ux2, uy2, uz2, g2, num, damp
    cdef double inv2h = 1.0 / (2.0 * h)
    cdef double invh2 = 1.0 / (h * h)
    cdef double inv4h2 = 1.0 / (4.0 * h * h)
    with nogil:
        for q in range(m):
            i = idx[q, 0]; j = idx[q, 1]; k = idx[q, 2]
            ip = _wrap_clip(i + 1, nx, wx); im = _wrap_clip(i - 1, nx, wx)
            jp = _wrap_clip(j + 1, ny, wy); jm = _wrap_clip(j - 1, ny, wy)
            kp = _wrap_clip(k + 1, nz, wz); km = _wrap_clip(k - 1, nz, wz)
            c = u[i, j, k]
            uxp = u[ip, j, k]; uxm = u[im, j, k]
            uyp = u[i, jp, k]; uym = u[i, jm, k]
            uzp = u[i, j, kp]; uzm = u[i, j, km]
            ux = (uxp - uxm) * inv2h
            uy = (uyp - uym) * inv2h
            uz = (uzp - uzm) * inv2h
            uxx = (uxp - 2.0 * c + uxm) * invh2
            uyy = (uyp - 2.0 * c + uym) * invh2
            uzz = (uzp - 2.0 * c + uzm) * invh2
            uxy = (u[ip, jp, k] - u[ip, jm, k] - u[im, jp, k] + u[im, jm, k]) * inv4h2
            uxz = (u[ip, j, kp] - u[ip, j, km] - u[im, j, kp] + u[im, j, km]) * inv4h2
            uyz = (u[i, jp, kp] - u[i, jp, km] - u[i, jm, kp] + u[i, jm, km]) * inv4h2
            ux2 = ux * ux; uy2 = uy * uy; uz2 = uz * uz
            g2 = ux2 + uy2 + uz2
            num = (uxx * (uy2 + uz2) + uyy * (ux2 + uz2) + uzz * (ux2 + uy2)
                   - 2.0 * (ux * uy * uxy + ux * uz * uxz + uy * uz * uyz))
            damp = _band_cutoff(fabs(c), beta, gamma)
            out[q] = c + damp * (dt * num / (g2 + eps2))
    return out_arr


cdef inline double _godunov_axis(double dm, double dp, bint pos) nogil:
    cdef double a, b
    if pos:
        a = dm if dm > 0.0 else 0.0
        b = dp if dp < 0.0 else 0.0
    else:
        a = dm if dm < 0.0 else 0.0
        b = dp if dp > 0.0 else 0.0
    a = a * a
    b = b * b
    return a if a > b else b


def reinit_steps(double[:, :, ::1] u, int[:, ::1] idx, double[::1] sgn,
                 cnp.uint8_t[::1] is_near, double[::1] d_near,
                 double h, double dt, int n_iter, wrap):
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1], nz = u.shape[2]
    cdef Py_ssize_t m = idx.shape[0]
    cdef bint wx = bool(wrap[0]), wy = bool(wrap[1]), wz = bool(wrap[2])
    out_arr = np.asarray(u).copy()
    cdef double[:, :, ::1] out = out_arr
    buf_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] buf = buf_arr
    cdef Py_ssize_t it, q, i, j, k, ip, im, jp, jm, kp, km
    cdef double c, grad, d, s
    cdef double invh = 1.0 / h
    cdef double rate = dt / h
    with nogil:
        for it in range(n_iter):
            for q in range(m):
                i = idx[q, 0]; j = idx[q, 1]; k = idx[q, 2]
                c = out[i, j, k]
                if is_near[q]:
                    d = d_near[q]
                    s = 1.0 if d > 0.0 else (-1.0 if d < 0.0 else 0.0)
                    buf[q] = c - rate * (s * fabs(c) - d)
                    continue
                ip = _wrap_clip(i + 1, nx, wx); im = _wrap_clip(i - 1, nx, wx)
                jp = _wrap_clip(j + 1, ny, wy); jm = _wrap_clip(j - 1, ny, wy)
                kp = _wrap_clip(k + 1, nz, wz); km = _wrap_clip(k - 1, nz, wz)
                grad = sqrt(
                    _godunov_axis((c - out[im, j, k]) * invh,
                                  (out[ip, j, k] - c) * invh, sgn[q] > 0.0)
                    + _godunov_axis((c - out[i, jm, k]) * invh,
                                    (out[i, jp, k] - c) * invh, sgn[q] > 0.0)
                    + _godunov_axis((c - out[i, j, km]) * invh,
                                    (out[i, j, kp] - c) * invh, sgn[q] > 0.0))
                buf[q] = c - dt * sgn[q] * (grad - 1.0)
            for q in range(m):
                out[idx[q, 0], idx[q, 1], idx[q, 2]] = buf[q]
    return out_arr


def z_extrema_bruteforce(double[:, ::1] pts, double[:, ::1] nrm, chunk=None):
    cdef Py_ssize_t n = pts.shape[0]
    z_max_arr = np.full(n, -np.inf)
    z_min_arr = np.full(n, np.inf)
    arg_max_arr = np.zeros(n, dtype=np.int64)
    arg_min_arr = np.zeros(n, dtype=np.int64)
    cdef double[::1] z_max = z_max_arr
    cdef double[::1] z_min = z_min_arr
    cdef cnp.int64_t[::1] arg_max = arg_max_arr
    cdef cnp.int64_t[::1] arg_min = arg_min_arr
    cdef Py_ssize_t v, w
    cdef double dx, dy, dz, den, ratio, hi, lo, x0, x1, x2, n0, n1, n2
    cdef Py_ssize_t ah, al
    with nogil:
        for v in range(n):
            x0 = pts[v, 0]; x1 = pts[v, 1]; x2 = pts[v, 2]
            n0 = nrm[v, 0]; n1 = nrm[v, 1]; n2 = nrm[v, 2]
            hi = -INFINITY; lo = INFINITY; ah = 0; al = 0
            for w in range(n):
                if w == v:
                    continue
                dx = pts[w, 0] - x0; dy = pts[w, 1] - x1; dz = pts[w, 2] - x2
                den = dx * dx + dy * dy + dz * dz
                if den <= 0.0:
                    continue
                ratio = 2.0 * (dx * n0 + dy * n1 + dz * n2) / den
                if ratio > hi:
                    hi = ratio; ah = w
                if ratio < lo:
                    lo = ratio; al = w
            z_max[v] = hi; z_min[v] = lo
            arg_max[v] = ah; arg_min[v] = al
    return z_max_arr, z_min_arr, arg_max_arr, arg_min_arr


def z_extrema_pruned(double[:, ::1] pts, double[:, ::1] nrm,
                     cnp.int64_t[::1] order, cnp.int64_t[::1] starts,
                     double[:, ::1] box_lo, double[:, ::1] box_hi):
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t ncell = starts.shape[0] - 1
    z_max_arr = np.full(n, -np.inf)
    z_min_arr = np.full(n, np.inf)
    arg_max_arr = np.zeros(n, dtype=np.int64)
    arg_min_arr = np.zeros(n, dtype=np.int64)
    cdef double[::1] z_max = z_max_arr
    cdef double[::1] z_min = z_min_arr
    cdef cnp.int64_t[::1] arg_max = arg_max_arr
    cdef cnp.int64_t[::1] arg_min = arg_min_arr

    cell_of_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] cell_of = cell_of_arr
    ub_arr = np.empty(ncell, dtype=np.float64)
    lb_arr = np.empty(ncell, dtype=np.float64)
    cdef double[::1] ub = ub_arr
    cdef double[::1] lb = lb_arr
    ord_ub_arr = np.empty(ncell, dtype=np.int64)
    ord_lb_arr = np.empty(ncell, dtype=np.int64)
    cdef cnp.int64_t[::1] ord_ub = ord_ub_arr
    cdef cnp.int64_t[::1] ord_lb = ord_lb_arr

    cdef Py_ssize_t v, c, p, w, q, ah, al
    cdef double x0, x1, x2, n0, n1, n2
    cdef double best_hi, best_lo, dx, dy, dz, den, ratio
    cdef double c0, c1, c2, e0, e1, e2, proj, spread, dlo2, dhi2, ax, n_hi, n_lo

    for c in range(ncell):
        for p in range(starts[c], starts[c + 1]):
            cell_of[order[p]] = c

    for v in range(n):
        x0 = pts[v, 0]; x1 = pts[v, 1]; x2 = pts[v, 2]
        n0 = nrm[v, 0]; n1 = nrm[v, 1]; n2 = nrm[v, 2]
        best_hi = -INFINITY; best_lo = INFINITY; ah = 0; al = 0

        c = cell_of[v]
        for p in range(starts[c], starts[c + 1]):
            w = order[p]
            if w == v:
                continue
            dx = pts[w, 0] - x0; dy = pts[w, 1] - x1; dz = pts[w, 2] - x2
            den = dx * dx + dy * dy + dz * dz
            if den <= 0.0:
                continue
            ratio = 2.0 * (dx * n0 + dy * n1 + dz * n2) / den
            if ratio > best_hi:
                best_hi = ratio; ah = w
            if ratio < best_lo:
                best_lo = ratio; al = w

        for c in range(ncell):
            c0 = 0.5 * (box_lo[c, 0] + box_hi[c, 0]) - x0
            c1 = 0.5 * (box_lo[c, 1] + box_hi[c, 1]) - x1
            c2 = 0.5 * (box_lo[c, 2] + box_hi[c, 2]) - x2
            e0 = 0.5 * (box_hi[c, 0] - box_lo[c, 0])
            e1 = 0.5 * (box_hi[c, 1] - box_lo[c, 1])
            e2 = 0.5 * (box_hi[c, 2] - box_lo[c, 2])
            proj = 2.0 * (c0 * n0 + c1 * n1 + c2 * n2)
            spread = 2.0 * (e0 * fabs(n0) + e1 * fabs(n1) + e2 * fabs(n2))
            dlo2 = 0.0
            ax = fabs(c0) - e0
            if ax > 0.0:
                dlo2 += ax * ax
            ax = fabs(c1) - e1
            if ax > 0.0:
                dlo2 += ax * ax
            ax = fabs(c2) - e2
            if ax > 0.0:
                dlo2 += ax * ax
            dhi2 = ((fabs(c0) + e0) ** 2 + (fabs(c1) + e1) ** 2
                    + (fabs(c2) + e2) ** 2)
            n_hi = proj + spread
            n_lo = proj - spread
            if n_hi <= 0.0:
                ub[c] = n_hi / dhi2 if dhi2 > 0.0 else 0.0
            elif dlo2 > 0.0:
                ub[c] = n_hi / dlo2
            else:
                ub[c] = INFINITY
            if n_lo >= 0.0:
                lb[c] = n_lo / dhi2 if dhi2 > 0.0 else 0.0
            elif dlo2 > 0.0:
                lb[c] = n_lo / dlo2
            else:
                lb[c] = -INFINITY

        ord_ub_arr[:] = np.argsort(-ub_arr)
        ord_lb_arr[:] = np.argsort(lb_arr)

        for q in range(ncell):
            c = ord_ub[q]
            if ub[c] <= best_hi:
                break
            if c == cell_of[v]:
                continue
            for p in range(starts[c], starts[c + 1]):
                w = order[p]
                dx = pts[w, 0] - x0; dy = pts[w, 1] - x1; dz = pts[w, 2] - x2
                den = dx * dx + dy * dy + dz * dz
                if den <= 0.0:
                    continue
                ratio = 2.0 * (dx * n0 + dy * n1 + dz * n2) / den
                if ratio > best_hi:
                    best_hi = ratio; ah = w
                if ratio < best_lo:
                    best_lo = ratio; al = w
        for q in range(ncell):
            c = ord_lb[q]
            if lb[c] >= best_lo:
                break
            if c == cell_of[v]:
                continue
            for p in range(starts[c], starts[c + 1]):
                w = order[p]
                dx = pts[w, 0] - x0; dy = pts[w, 1] - x1; dz = pts[w, 2] - x2
                den = dx * dx + dy * dy + dz * dz
                if den <= 0.0:
                    continue
                ratio = 2.0 * (dx * n0 + dy * n1 + dz * n2) / den
                if ratio > best_hi:
                    best_hi = ratio; ah = w
                if ratio < best_lo:
                    best_lo = ratio; al = w
        z_max[v] = best_hi; z_min[v] = best_lo
        arg_max[v] = ah; arg_min[v] = al
    return z_max_arr, z_min_arr, arg_max_arr, arg_min_arr
