# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled step kernels. Pure-numpy twins with identical contracts live in
_core_py; expressions are kept in the same form so results agree to rounding."""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()

ctypedef cnp.int64_t i64


cdef inline Py_ssize_t _wrap(Py_ssize_t i, Py_ssize_t n) nogil:
    i = i % n
    if i < 0:
        i += n
    return i


def scan_1d(const double[::1] f, const double[:, ::1] pot_dep, const double[::1] ke,
            const i64[::1] ishift, const double[::1] frac,
            double kappa, double dt, bint forward):
    cdef Py_ssize_t m = pot_dep.shape[0]
    cdef Py_ssize_t n = pot_dep.shape[1]
    best_arr = np.empty(n, dtype=np.float64)
    bestk_arr = np.zeros(n, dtype=np.int64)
    cdef double[::1] best = best_arr
    cdef i64[::1] bestk = bestk_arr
    cdef double coef = (1.0 + kappa * dt) if forward else (1.0 - kappa * dt)
    cdef Py_ssize_t k, i, s, i0, i1
    cdef double w, kek, fd, phi
    for k in range(m):
        s = _wrap(<Py_ssize_t> ishift[k], n)
        w = frac[k]
        kek = ke[k]
        if forward:
            for i in range(n):
                i0 = i + s
                if i0 >= n:
                    i0 -= n
                i1 = i0 + 1
                if i1 >= n:
                    i1 -= n
                fd = (1.0 - w) * f[i0] + w * f[i1]
                phi = fd * coef - dt * (kek - pot_dep[k, i])
                if k == 0 or phi > best[i]:
                    best[i] = phi
                    bestk[i] = k
        else:
            for i in range(n):
                i0 = i + s
                if i0 >= n:
                    i0 -= n
                i1 = i0 + 1
                if i1 >= n:
                    i1 -= n
                fd = (1.0 - w) * f[i0] + w * f[i1]
                phi = fd * coef + dt * (kek - pot_dep[k, i])
                if k == 0 or phi < best[i]:
                    best[i] = phi
                    bestk[i] = k
    return best_arr, bestk_arr


def phi_rows_1d(const double[::1] f, const double[:, ::1] pot_dep, const double[::1] ke,
                const i64[::1] ishift, const double[::1] frac,
                double kappa, double dt, bint forward, const i64[::1] krow):
    cdef Py_ssize_t n = pot_dep.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double coef = (1.0 + kappa * dt) if forward else (1.0 - kappa * dt)
    cdef Py_ssize_t i, k, i0, i1
    cdef double w, fd
    for i in range(n):
        k = <Py_ssize_t> krow[i]
        i0 = _wrap(i + <Py_ssize_t> ishift[k], n)
        i1 = i0 + 1
        if i1 >= n:
            i1 -= n
        w = frac[k]
        fd = (1.0 - w) * f[i0] + w * f[i1]
        if forward:
            out[i] = fd * coef - dt * (ke[k] - pot_dep[k, i])
        else:
            out[i] = fd * coef + dt * (ke[k] - pot_dep[k, i])
    return out_arr


def scan_2d(const double[:, ::1] f, const double[:, :, ::1] pot_dep, const double[::1] ke,
            const i64[:, ::1] ishift, const double[:, ::1] frac,
            double kappa, double dt, bint forward):
    cdef Py_ssize_t m = pot_dep.shape[0]
    cdef Py_ssize_t n1 = pot_dep.shape[1]
    cdef Py_ssize_t n2 = pot_dep.shape[2]
    best_arr = np.empty((n1, n2), dtype=np.float64)
    bestk_arr = np.zeros((n1, n2), dtype=np.int64)
    cdef double[:, ::1] best = best_arr
    cdef i64[:, ::1] bestk = bestk_arr
    cdef double coef = (1.0 + kappa * dt) if forward else (1.0 - kappa * dt)
    cdef Py_ssize_t k, i, j, s1, s2, a0, a1, b0, b1
    cdef double w1, w2, kek, fd, phi
    for k in range(m):
        s1 = _wrap(<Py_ssize_t> ishift[k, 0], n1)
        s2 = _wrap(<Py_ssize_t> ishift[k, 1], n2)
        w1 = frac[k, 0]
        w2 = frac[k, 1]
        kek = ke[k]
        for i in range(n1):
            a0 = i + s1
            if a0 >= n1:
                a0 -= n1
            a1 = a0 + 1
            if a1 >= n1:
                a1 -= n1
            for j in range(n2):
                b0 = j + s2
                if b0 >= n2:
                    b0 -= n2
                b1 = b0 + 1
                if b1 >= n2:
                    b1 -= n2
                fd = ((1.0 - w1) * (1.0 - w2) * f[a0, b0]
                      + w1 * (1.0 - w2) * f[a1, b0]
                      + (1.0 - w1) * w2 * f[a0, b1]
                      + w1 * w2 * f[a1, b1])
                if forward:
                    phi = fd * coef - dt * (kek - pot_dep[k, i, j])
                    if k == 0 or phi > best[i, j]:
                        best[i, j] = phi
                        bestk[i, j] = k
                else:
                    phi = fd * coef + dt * (kek - pot_dep[k, i, j])
                    if k == 0 or phi < best[i, j]:
                        best[i, j] = phi
                        bestk[i, j] = k
    return best_arr, bestk_arr


def phi_rows_2d(const double[:, ::1] f, const double[:, :, ::1] pot_dep, const double[::1] ke,
                const i64[:, ::1] ishift, const double[:, ::1] frac,
                double kappa, double dt, bint forward, const i64[:, ::1] krow):
    cdef Py_ssize_t n1 = pot_dep.shape[1]
    cdef Py_ssize_t n2 = pot_dep.shape[2]
    out_arr = np.empty((n1, n2), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double coef = (1.0 + kappa * dt) if forward else (1.0 - kappa * dt)
    cdef Py_ssize_t i, j, k, a0, a1, b0, b1
    cdef double w1, w2, fd
    for i in range(n1):
        for j in range(n2):
            k = <Py_ssize_t> krow[i, j]
            a0 = _wrap(i + <Py_ssize_t> ishift[k, 0], n1)
            a1 = a0 + 1
            if a1 >= n1:
                a1 -= n1
            b0 = _wrap(j + <Py_ssize_t> ishift[k, 1], n2)
            b1 = b0 + 1
            if b1 >= n2:
                b1 -= n2
            w1 = frac[k, 0]
            w2 = frac[k, 1]
            fd = ((1.0 - w1) * (1.0 - w2) * f[a0, b0]
                  + w1 * (1.0 - w2) * f[a1, b0]
                  + (1.0 - w1) * w2 * f[a0, b1]
                  + w1 * w2 * f[a1, b1])
            if forward:
                out[i, j] = fd * coef - dt * (ke[k] - pot_dep[k, i, j])
            else:
                out[i, j] = fd * coef + dt * (ke[k] - pot_dep[k, i, j])
    return out_arr


def interp_at_1d(const double[::1] f, const double[::1] q):
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t mq = q.shape[0]
    out_arr = np.empty(mq, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, i0, i1
    cdef double qf, w
    for i in range(mq):
        qf = floor(q[i])
        w = q[i] - qf
        i0 = _wrap(<Py_ssize_t> qf, n)
        i1 = i0 + 1
        if i1 >= n:
            i1 -= n
        out[i] = (1.0 - w) * f[i0] + w * f[i1]
    return out_arr


def interp_at_2d(const double[:, ::1] f, const double[:, ::1] q):
    cdef Py_ssize_t n1 = f.shape[0]
    cdef Py_ssize_t n2 = f.shape[1]
    cdef Py_ssize_t mq = q.shape[0]
    out_arr = np.empty(mq, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, a0, a1, b0, b1
    cdef double q1f, q2f, w1, w2
    for i in range(mq):
        q1f = floor(q[i, 0])
        q2f = floor(q[i, 1])
        w1 = q[i, 0] - q1f
        w2 = q[i, 1] - q2f
        a0 = _wrap(<Py_ssize_t> q1f, n1)
        b0 = _wrap(<Py_ssize_t> q2f, n2)
        a1 = a0 + 1
        if a1 >= n1:
            a1 -= n1
        b1 = b0 + 1
        if b1 >= n2:
            b1 -= n2
        out[i] = ((1.0 - w1) * (1.0 - w2) * f[a0, b0]
                  + w1 * (1.0 - w2) * f[a1, b0]
                  + (1.0 - w1) * w2 * f[a0, b1]
                  + w1 * w2 * f[a1, b1])
    return out_arr
