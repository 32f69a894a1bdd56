# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Same operation order as _pykernels, no fast-math."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()

BACKEND = "cython"


cdef inline double _prox1(int code, double v, double gamma, double lo, double hi,
                          double lam) noexcept nogil:
    cdef double t
    if code == 1:
        t = gamma * lam
        if v > t:
            return v - t
        if v < -t:
            return v + t
        return 0.0
    if code == 2 or code == 3:
        if v < lo:
            v = lo
        if v > hi:
            v = hi
        return v
    if code == 4:
        return v / (1.0 + gamma * lam)
    return v


def prox(int code, x, double gamma, lo, hi, double lam):
    if code < 0 or code > 4:
        raise ValueError(f"unknown g code {code}")
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] lov = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[::1] hiv = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], i
    out = np.empty(n)
    cdef double[::1] ov = out
    for i in range(n):
        ov[i] = _prox1(code, xv[i], gamma, lov[i], hiv[i], lam)
    return out


def run_momentum(diag, b, int code, lo, hi, double lam, double L, x0,
                 wyz, wyx, wzz, wzy, gstep, gamma, corr):
    cdef const double[::1] d = np.ascontiguousarray(diag, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[::1] lov = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[::1] hiv = np.ascontiguousarray(hi, dtype=np.float64)
    cdef const double[::1] cyz = np.ascontiguousarray(wyz, dtype=np.float64)
    cdef const double[::1] cyx = np.ascontiguousarray(wyx, dtype=np.float64)
    cdef const double[::1] czz = np.ascontiguousarray(wzz, dtype=np.float64)
    cdef const double[::1] czy = np.ascontiguousarray(wzy, dtype=np.float64)
    cdef const double[::1] cgs = np.ascontiguousarray(gstep, dtype=np.float64)
    cdef const double[::1] cgm = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef const double[::1] ccr = np.ascontiguousarray(corr, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0], N = cyz.shape[0], k, i
    X_ = np.empty((N + 1, n))
    Z_ = np.empty((N + 1, n))
    Y_ = np.empty((N, n))
    ZB_ = np.empty((N, n))
    G_ = np.empty((N, n))
    cdef double[:, ::1] X = X_
    cdef double[:, ::1] Z = Z_
    cdef double[:, ::1] Y = Y_
    cdef double[:, ::1] ZB = ZB_
    cdef double[:, ::1] G = G_
    cdef double inv_L = 1.0 / L
    cdef double y, gr, zb, z1, x, z
    X_[0] = x0
    Z_[0] = x0
    with nogil:
        for k in range(N):
            for i in range(n):
                x = X[k, i]
                z = Z[k, i]
                y = cyz[k] * z + cyx[k] * x
                gr = d[i] * y - bv[i]
                zb = czz[k] * z + czy[k] * y - cgs[k] * gr
                z1 = _prox1(code, zb, cgm[k], lov[i], hiv[i], lam)
                Y[k, i] = y
                G[k, i] = gr
                ZB[k, i] = zb
                Z[k + 1, i] = z1
                X[k + 1, i] = y - inv_L * gr - ccr[k] * (zb - z1)
    return X_, Y_, Z_, ZB_, G_


def run_pg(diag, b, int code, lo, hi, double lam, double L, x0, double momentum, Py_ssize_t N):
    cdef const double[::1] d = np.ascontiguousarray(diag, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[::1] lov = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[::1] hiv = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0], k, i
    X_ = np.empty((N + 1, n))
    Y_ = np.empty((N, n))
    ZB_ = np.empty((N, n))
    G_ = np.empty((N, n))
    cdef double[:, ::1] X = X_
    cdef double[:, ::1] Y = Y_
    cdef double[:, ::1] ZB = ZB_
    cdef double[:, ::1] G = G_
    cdef double inv_L = 1.0 / L
    cdef double y, gr, zb, x, xprev
    X_[0] = x0
    with nogil:
        for k in range(N):
            for i in range(n):
                x = X[k, i]
                xprev = X[k - 1, i] if k > 0 else x
                y = x + momentum * (x - xprev)
                gr = d[i] * y - bv[i]
                zb = y - inv_L * gr
                Y[k, i] = y
                G[k, i] = gr
                ZB[k, i] = zb
                X[k + 1, i] = _prox1(code, zb, inv_L, lov[i], hiv[i], lam)
    return X_, Y_, X_.copy(), ZB_, G_


def pg_solve(diag, b, int code, lo, hi, double lam, double L, x0, double tol, long max_iter):
    cdef const double[::1] d = np.ascontiguousarray(diag, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[::1] lov = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[::1] hiv = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0], i
    x_ = np.array(x0, dtype=np.float64)
    p_ = np.empty(n)
    cdef double[::1] x = x_
    cdef double[::1] p = p_
    cdef double inv_L = 1.0 / L
    cdef double res = INFINITY, s, diff
    cdef long it, done = max_iter
    with nogil:
        for it in range(max_iter):
            s = 0.0
            for i in range(n):
                p[i] = _prox1(code, x[i] - inv_L * (d[i] * x[i] - bv[i]), inv_L,
                              lov[i], hiv[i], lam)
                diff = x[i] - p[i]
                s = s + diff * diff
            res = sqrt(s)
            if res <= tol:
                done = it
                break
            for i in range(n):
                x[i] = p[i]
    return x_, res, done
