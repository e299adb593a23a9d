# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-cell closure and relaxation solves.

Same algorithms and return conventions as ``lowmach._pykernels``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, fabs, pow, ceil, fmin, fmax

cnp.import_array()

BACKEND = "cython"

DEF XBOUND = 32.23619130191664
DEF N_EXTRAP = 6
DEF CHUNK_STIFFNESS = 0.25
DEF STIFF_CUTOFF = 40.0
DEF MAX_CHUNKS = 4096


cdef inline double softplus(double x) nogil:
    return fmax(x, 0.0) + log1p(exp(-fabs(x)))


cdef inline double sigmoid(double x) nogil:
    cdef double e = exp(-fabs(x))
    if x >= 0:
        return 1.0 / (1.0 + e)
    return e / (1.0 + e)


cdef int closure_cell(double Rp, double Rm, double Sp, double Sm, double gp, double gm,
                      int maxiter, double *alpha, long *iters) nogil:
    cdef double lnRp, lnRm, K, x, lo, hi, h, a, dh, scale, xn
    cdef int it
    if not (Rp > 0 and Rm > 0):
        return 1
    lnRp = log(Rp)
    lnRm = log(Rm)
    K = gp * lnRp + Sp - gm * lnRm - Sm
    lo = -XBOUND
    hi = XBOUND
    if not (K + gp * softplus(-lo) - gm * softplus(lo) > 0
            and K + gp * softplus(-hi) - gm * softplus(hi) < 0):
        return 2
    x = fmin(fmax(lnRp - lnRm, -XBOUND), XBOUND)
    for it in range(maxiter):
        h = K + gp * softplus(-x) - gm * softplus(x)
        iters[0] = it + 1
        if it == 0 and h == 0.0:
            alpha[0] = Rp / (Rp + Rm)
            return 0
        scale = fabs(K) + gp * softplus(-x) + gm * softplus(x) + 1.0
        if fabs(h) <= 4e-16 * scale:
            alpha[0] = sigmoid(x)
            return 0
        if h > 0:
            lo = x
        elif h < 0:
            hi = x
        a = sigmoid(x)
        dh = -gp * (1.0 - a) - gm * a
        xn = x - h / dh
        if not (xn > lo and xn < hi):
            xn = 0.5 * (lo + hi)
        if fabs(xn - x) <= 1e-15 * (1.0 + fabs(x)):
            alpha[0] = sigmoid(xn)
            return 0
        x = xn
    return 2


def closure_solve(R_plus, R_minus, S_plus, S_minus, double gamma_plus, double gamma_minus,
                  int maxiter=100):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Rp = np.ascontiguousarray(R_plus, dtype=np.float64)
    cdef Py_ssize_t n = Rp.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Rm = np.ascontiguousarray(R_minus, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Sp = np.ascontiguousarray(
        np.broadcast_to(np.asarray(S_plus, dtype=np.float64), (n,)))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Sm = np.ascontiguousarray(
        np.broadcast_to(np.asarray(S_minus, dtype=np.float64), (n,)))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] alpha = np.full(n, np.nan)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] iters = np.zeros(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] status = np.zeros(n, dtype=np.int64)
    cdef Py_ssize_t i
    cdef double a
    cdef long itc
    with nogil:
        for i in range(n):
            a = 0.0 / 1.0
            itc = 0
            status[i] = closure_cell(Rp[i], Rm[i], Sp[i], Sm[i], gamma_plus, gamma_minus,
                                     maxiter, &a, &itc)
            iters[i] = itc
            if status[i] == 0:
                alpha[i] = a
    return alpha, iters, status


cdef inline double phi(double a, double A, double B, double gp, double gm) nogil:
    return a * (1.0 - a) * (A * pow(a, -gp) - B * pow(1.0 - a, -gm))


cdef inline double dphi(double a, double A, double B, double gp, double gm) nogil:
    cdef double pp = A * pow(a, -gp)
    cdef double pm = B * pow(1.0 - a, -gm)
    return -pp * (a + (1.0 - a) * (gp - 1.0)) - pm * ((1.0 - a) + a * (gm - 1.0))


cdef int implicit_euler(double c, double astar, double k, double A, double B,
                        double gp, double gm, int maxiter, double *out, int *iters) nogil:
    cdef double lo = fmin(c, astar)
    cdef double hi = fmax(c, astar)
    cdef double a = c, r, dr, an
    cdef int it
    if lo == hi or k == 0:
        out[0] = c
        return 0
    for it in range(maxiter):
        if it + 1 > iters[0]:
            iters[0] = it + 1
        r = a - c - k * phi(a, A, B, gp, gm)
        if r == 0:
            out[0] = a
            return 0
        dr = 1.0 - k * dphi(a, A, B, gp, gm)
        if r < 0:
            lo = a
        else:
            hi = a
        an = a - r / dr
        if not (an >= lo and an <= hi):
            an = 0.5 * (lo + hi)
        if fabs(an - a) <= 1e-15 * a or hi - lo <= 1e-15 * hi:
            out[0] = fmin(fmax(an, fmin(c, astar)), fmax(c, astar))
            return 0
        a = an
    out[0] = a
    return 2


cdef int relax_cell(double Rp, double Rm, double Sp, double Sm, double a0, double ast,
                    double h, double gp, double gm, int maxiter,
                    double *out, int *iters) nogil:
    cdef double A, B, pp0, pm0, pps, pms, lam_lo, lam_hi, H, c, v, k, ratio
    cdef double T[N_EXTRAP]
    cdef long chunks, j
    cdef int q, s, kcol, st = 0, rc
    out[0] = a0
    if h <= 0 or a0 == ast:
        return 0
    A = pow(Rp, gp) * exp(Sp)
    B = pow(Rm, gm) * exp(Sm)
    pp0 = A * pow(a0, -gp)
    pm0 = B * pow(1.0 - a0, -gm)
    pps = A * pow(ast, -gp)
    pms = B * pow(1.0 - ast, -gm)
    lam_lo = fmin(pp0, pps) * fmin(1.0, gp - 1.0) + fmin(pm0, pms) * fmin(1.0, gm - 1.0)
    lam_hi = fmax(pp0, pps) * fmax(1.0, gp - 1.0) + fmax(pm0, pms) * fmax(1.0, gm - 1.0)
    if h * lam_lo >= STIFF_CUTOFF:
        out[0] = ast
        return 0
    chunks = <long> fmin(fmax(ceil(h * lam_hi / CHUNK_STIFFNESS), 1.0), MAX_CHUNKS)
    H = h / chunks
    c = a0
    for j in range(chunks):
        for q in range(N_EXTRAP):
            k = H / (q + 1)
            v = c
            for s in range(q + 1):
                rc = implicit_euler(v, ast, k, A, B, gp, gm, maxiter, &v, iters)
                if rc > st:
                    st = rc
            T[q] = v
        for kcol in range(1, N_EXTRAP):
            for q in range(N_EXTRAP - 1, kcol - 1, -1):
                ratio = (q + 1.0) / (q + 1.0 - kcol)
                T[q] = T[q] + (T[q] - T[q - 1]) / (ratio - 1.0)
        c = fmin(fmax(T[N_EXTRAP - 1], fmin(c, ast)), fmax(c, ast))
    out[0] = c
    return st


def relax_solve(R_plus, R_minus, S_plus, S_minus, alpha_old, alpha_star, double h,
                double gamma_plus, double gamma_minus, int maxiter=100):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Rp = np.ascontiguousarray(R_plus, dtype=np.float64)
    cdef Py_ssize_t n = Rp.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Rm = np.ascontiguousarray(R_minus, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Sp = np.ascontiguousarray(
        np.broadcast_to(np.asarray(S_plus, dtype=np.float64), (n,)))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Sm = np.ascontiguousarray(
        np.broadcast_to(np.asarray(S_minus, dtype=np.float64), (n,)))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a0 = np.ascontiguousarray(alpha_old, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ast = np.ascontiguousarray(alpha_star, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] status = np.zeros(n, dtype=np.int64)
    cdef Py_ssize_t i
    cdef int iters = 0
    cdef double v
    with nogil:
        for i in range(n):
            status[i] = relax_cell(Rp[i], Rm[i], Sp[i], Sm[i], a0[i], ast[i], h,
                                   gamma_plus, gamma_minus, maxiter, &v, &iters)
            out[i] = v
    return out, iters, status
