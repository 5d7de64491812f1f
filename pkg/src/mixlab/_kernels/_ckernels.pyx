# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``; same signatures and results."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, log, round, sqrt

cnp.import_array()

cdef double KEYS_A = -0.5


cdef inline void _keys(double f, double* w) noexcept nogil:
    cdef double a = KEYS_A
    cdef double t0 = 1.0 + f, t1 = f, t2 = 1.0 - f, t3 = 2.0 - f
    w[0] = a * t0 * t0 * t0 - 5 * a * t0 * t0 + 8 * a * t0 - 4 * a
    w[1] = (a + 2) * t1 * t1 * t1 - (a + 3) * t1 * t1 + 1
    w[2] = (a + 2) * t2 * t2 * t2 - (a + 3) * t2 * t2 + 1
    w[3] = a * t3 * t3 * t3 - 5 * a * t3 * t3 + 8 * a * t3 - 4 * a


def bicubic_periodic(const double[:, ::1] samples, x, y):
    cdef Py_ssize_t N = samples.shape[0]
    xa = np.ascontiguousarray(x, dtype=np.float64)
    ya = np.ascontiguousarray(y, dtype=np.float64)
    shape = xa.shape
    cdef const double[::1] xf = xa.reshape(-1)
    cdef const double[::1] yf = ya.reshape(-1)
    out = np.empty(xf.shape[0])
    cdef double[::1] of = out
    cdef Py_ssize_t n = xf.shape[0], m, p, q, iu, iv, ip, iq
    cdef double u, v, fu, fv, s, row
    cdef double wu[4]
    cdef double wv[4]
    with nogil:
        for m in range(n):
            u = xf[m] * N
            v = yf[m] * N
            fu = floor(u)
            fv = floor(v)
            _keys(u - fu, wu)
            _keys(v - fv, wv)
            iu = (<Py_ssize_t>fu) % N
            iv = (<Py_ssize_t>fv) % N
            if iu < 0:
                iu += N
            if iv < 0:
                iv += N
            s = 0.0
            for p in range(4):
                ip = iu + p - 1
                if ip < 0:
                    ip += N
                elif ip >= N:
                    ip -= N
                row = 0.0
                for q in range(4):
                    iq = iv + q - 1
                    if iq < 0:
                        iq += N
                    elif iq >= N:
                        iq -= N
                    row += wv[q] * samples[ip, iq]
                s += wu[p] * row
            of[m] = s
    return out.reshape(shape)


def log_ball_averages(const double[:, ::1] px, const double[:, ::1] py,
                      const cnp.int64_t[::1] off_a, const cnp.int64_t[::1] off_b,
                      const cnp.int64_t[::1] jmin, const double[::1] radii, const cnp.int64_t[::1] counts):
    cdef Py_ssize_t N = px.shape[0]
    cdef Py_ssize_t R = radii.shape[0]
    cdef Py_ssize_t n_off = off_a.shape[0]
    cdef Py_ssize_t M = N * N
    out = np.zeros((R, N, N))
    cdef double[:, :, ::1] acc3 = out
    cdef double* acc = &acc3[0, 0, 0]
    dist = np.empty(M)
    cdef double[::1] dv = dist
    cdef double* d = &dv[0]
    cdef Py_ssize_t i, j, o, q, ii, jj, m
    cdef double dx, dy, inv, scale
    cdef double* row
    with nogil:
        for o in range(n_off):
            # distances for this offset over all nodes, then one contiguous
            # (vectorisable) pass per radius containing it
            for i in range(N):
                ii = (i + off_a[o]) % N
                if ii < 0:
                    ii += N
                for j in range(N):
                    jj = (j + off_b[o]) % N
                    if jj < 0:
                        jj += N
                    dx = px[ii, jj] - px[i, j]
                    dx = dx - round(dx)
                    dy = py[ii, jj] - py[i, j]
                    dy = dy - round(dy)
                    d[i * N + j] = sqrt(dx * dx + dy * dy)
            for q in range(jmin[o], R):
                inv = 1.0 / radii[q]
                row = acc + q * M
                for m in range(M):
                    row[m] += log(1.0 + d[m] * inv)
        for q in range(R):
            scale = 1.0 / counts[q]
            row = acc + q * M
            for m in range(M):
                row[m] *= scale
    return out
