# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot numerical kernels.

Same contracts as ``_kernels_py``; the dispatcher in ``_backend`` feeds
both with canonicalised float64 arrays.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def thomas_batch(const double[:, ::1] dl, const double[:, ::1] d, const double[:, ::1] du,
                 const double[:, ::1] b):
    cdef Py_ssize_t m = d.shape[0], n = d.shape[1]
    out = np.empty((m, n))
    cp_arr = np.empty(n)
    bp_arr = np.empty(n)
    cdef double[:, ::1] x = out
    cdef double[::1] cp = cp_arr
    cdef double[::1] bp = bp_arr
    cdef Py_ssize_t i, k
    cdef double denom
    for i in range(m):
        denom = d[i, 0]
        cp[0] = du[i, 0] / denom
        bp[0] = b[i, 0] / denom
        for k in range(1, n):
            denom = d[i, k] - dl[i, k] * cp[k - 1]
            cp[k] = du[i, k] / denom
            bp[k] = (b[i, k] - dl[i, k] * bp[k - 1]) / denom
        x[i, n - 1] = bp[n - 1]
        for k in range(n - 2, -1, -1):
            x[i, k] = bp[k] - cp[k] * x[i, k + 1]
    return out


def ml_mass_flux_rusanov(const double[:, ::1] h_l, const double[:, ::1] h_r,
                         const double[:, ::1] s_l, const double[:, ::1] s_r):
    cdef Py_ssize_t n = h_l.shape[0], m = h_l.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] f = out
    cdef Py_ssize_t a, j
    cdef double amax, v
    for j in range(m):
        amax = 0.0
        for a in range(n):
            v = fabs(s_l[a, j])
            if v > amax:
                amax = v
            v = fabs(s_r[a, j])
            if v > amax:
                amax = v
        for a in range(n):
            f[a, j] = 0.5 * (h_l[a, j] * s_l[a, j] + h_r[a, j] * s_r[a, j]) \
                - 0.5 * amax * (h_r[a, j] - h_l[a, j])
    return out


def ml_mass_flux_upwind(const double[:, ::1] h_l, const double[:, ::1] h_r,
                        const double[:, ::1] s_l, const double[:, ::1] s_r):
    cdef Py_ssize_t n = h_l.shape[0], m = h_l.shape[1]
    out = np.empty((n, m))
    cdef double[:, ::1] f = out
    cdef Py_ssize_t a, j
    for j in range(m):
        for a in range(n):
            if h_l[a, j] < h_r[a, j]:
                f[a, j] = h_l[a, j] * s_l[a, j]
            else:
                f[a, j] = h_r[a, j] * s_r[a, j]
    return out


def decentered(const double[::1] fm, const double[::1] phi_l, const double[::1] phi_r):
    cdef Py_ssize_t m = fm.shape[0]
    out = np.empty(m)
    cdef double[::1] g = out
    cdef Py_ssize_t j
    for j in range(m):
        if fm[j] > 0.0:
            g[j] = phi_l[j] * fm[j]
        else:
            g[j] = phi_r[j] * fm[j]
    return out


def swe_flux_hydro(const double[::1] h_l, const double[::1] h_r, const double[::1] u_l,
                   const double[::1] u_r, const double[::1] w_l, const double[::1] w_r,
                   const double[::1] z_l, const double[::1] z_r, double g):
    cdef Py_ssize_t m = h_l.shape[0]
    fh_arr = np.empty(m)
    fq_arr = np.empty(m)
    fw_arr = np.empty(m)
    pl_arr = np.empty(m)
    pr_arr = np.empty(m)
    cdef double[::1] fh = fh_arr, fq = fq_arr, fw = fw_arr
    cdef double[::1] pl = pl_arr, pr = pr_arr
    cdef Py_ssize_t j
    cdef double zs, hl, hr, a, al, ar, ql, qr
    for j in range(m):
        zs = z_l[j] if z_l[j] > z_r[j] else z_r[j]
        hl = h_l[j] + z_l[j] - zs
        if hl < 0.0:
            hl = 0.0
        hr = h_r[j] + z_r[j] - zs
        if hr < 0.0:
            hr = 0.0
        al = fabs(u_l[j]) + sqrt(g * hl)
        ar = fabs(u_r[j]) + sqrt(g * hr)
        a = al if al > ar else ar
        ql = hl * u_l[j]
        qr = hr * u_r[j]
        pl[j] = 0.5 * g * hl * hl
        pr[j] = 0.5 * g * hr * hr
        fh[j] = 0.5 * (ql + qr) - 0.5 * a * (hr - hl)
        fq[j] = 0.5 * (ql * u_l[j] + pl[j] + qr * u_r[j] + pr[j]) - 0.5 * a * (qr - ql)
        fw[j] = 0.5 * (ql * w_l[j] + qr * w_r[j]) - 0.5 * a * (hr * w_r[j] - hl * w_l[j])
    return fh_arr, fq_arr, fw_arr, pl_arr, pr_arr
