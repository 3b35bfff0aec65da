# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled counterparts of ``_pykernels``; see that module for conventions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, isfinite

cnp.import_array()


cdef void _prox_row(double* u, const Py_ssize_t* members, const Py_ssize_t* offsets,
                    const double* gweights, Py_ssize_t n_groups, double scale) noexcept nogil:
    cdef Py_ssize_t g, i
    cdef double tau, nrm, factor
    for g in range(n_groups):
        tau = scale * gweights[g]
        nrm = 0.0
        for i in range(offsets[g], offsets[g + 1]):
            nrm += u[members[i]] * u[members[i]]
        nrm = sqrt(nrm)
        if nrm > tau:
            factor = 1.0 - tau / nrm
            for i in range(offsets[g], offsets[g + 1]):
                u[members[i]] *= factor
        else:
            for i in range(offsets[g], offsets[g + 1]):
                u[members[i]] = 0.0


cdef double _penalty(const double* A, Py_ssize_t N, Py_ssize_t S,
                     const Py_ssize_t* members, const Py_ssize_t* offsets,
                     const double* gweights, Py_ssize_t n_groups) noexcept nogil:
    cdef Py_ssize_t j, g, i
    cdef double total = 0.0, nrm, a
    for j in range(N):
        for g in range(n_groups):
            nrm = 0.0
            for i in range(offsets[g], offsets[g + 1]):
                a = A[j * S + members[i]]
                nrm += a * a
            total += gweights[g] * sqrt(nrm)
    return total


cdef void _residuals(const double* X, const double* y, const double* A,
                     const Py_ssize_t* row_offsets, Py_ssize_t S, Py_ssize_t N,
                     double* R) noexcept nogil:
    cdef Py_ssize_t s, r, j
    cdef double acc
    for s in range(S):
        for r in range(row_offsets[s], row_offsets[s + 1]):
            acc = 0.0
            for j in range(N):
                acc += X[r * N + j] * A[j * S + s]
            R[r] = acc - y[r]


cdef double _smooth(const double* R, const double* w, const Py_ssize_t* row_offsets,
                    Py_ssize_t S) noexcept nogil:
    cdef Py_ssize_t s, r
    cdef double total = 0.0, part
    for s in range(S):
        part = 0.0
        for r in range(row_offsets[s], row_offsets[s + 1]):
            part += R[r] * R[r]
        total += 0.5 * w[s] * part
    return total


cdef void _gradient(const double* X, const double* R, const double* w,
                    const Py_ssize_t* row_offsets, Py_ssize_t S, Py_ssize_t N,
                    double* G) noexcept nogil:
    cdef Py_ssize_t s, r, j
    cdef double coef
    for j in range(N * S):
        G[j] = 0.0
    for s in range(S):
        for r in range(row_offsets[s], row_offsets[s + 1]):
            coef = w[s] * R[r]
            for j in range(N):
                G[j * S + s] += coef * X[r * N + j]


def prox_tree_rows(V, members, offsets, gweights, double scale):
    cdef cnp.ndarray[double, ndim=2, mode="c"] U = np.array(V, dtype=np.float64, order="C")
    cdef cnp.ndarray[Py_ssize_t, ndim=1, mode="c"] mem = np.ascontiguousarray(members, dtype=np.intp)
    cdef cnp.ndarray[Py_ssize_t, ndim=1, mode="c"] off = np.ascontiguousarray(offsets, dtype=np.intp)
    cdef cnp.ndarray[double, ndim=1, mode="c"] gw = np.ascontiguousarray(gweights, dtype=np.float64)
    cdef Py_ssize_t N = U.shape[0], S = U.shape[1], j
    cdef Py_ssize_t n_groups = off.shape[0] - 1
    with nogil:
        for j in range(N):
            _prox_row(&U[j, 0], &mem[0], &off[0], &gw[0], n_groups, scale)
    return U


def tree_penalty(A, members, offsets, gweights):
    cdef cnp.ndarray[double, ndim=2, mode="c"] Ac = np.ascontiguousarray(A, dtype=np.float64)
    cdef cnp.ndarray[Py_ssize_t, ndim=1, mode="c"] mem = np.ascontiguousarray(members, dtype=np.intp)
    cdef cnp.ndarray[Py_ssize_t, ndim=1, mode="c"] off = np.ascontiguousarray(offsets, dtype=np.intp)
    cdef cnp.ndarray[double, ndim=1, mode="c"] gw = np.ascontiguousarray(gweights, dtype=np.float64)
    return _penalty(&Ac[0, 0], Ac.shape[0], Ac.shape[1], &mem[0], &off[0], &gw[0],
                    off.shape[0] - 1)


def fista(X, y, row_offsets, w, members, offsets, gweights, double lam, A0,
          double step, bint backtrack, double shrink, Py_ssize_t max_iter,
          double tol, Py_ssize_t patience):
    cdef cnp.ndarray[double, ndim=2, mode="c"] Xc = np.ascontiguousarray(X, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] yc = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[Py_ssize_t, ndim=1, mode="c"] ro = np.ascontiguousarray(row_offsets, dtype=np.intp)
    cdef cnp.ndarray[double, ndim=1, mode="c"] wc = np.ascontiguousarray(w, dtype=np.float64)
    cdef cnp.ndarray[Py_ssize_t, ndim=1, mode="c"] mem = np.ascontiguousarray(members, dtype=np.intp)
    cdef cnp.ndarray[Py_ssize_t, ndim=1, mode="c"] off = np.ascontiguousarray(offsets, dtype=np.intp)
    cdef cnp.ndarray[double, ndim=1, mode="c"] gw = np.ascontiguousarray(gweights, dtype=np.float64)
    cdef Py_ssize_t N = Xc.shape[1], S = wc.shape[0], M = yc.shape[0]
    cdef Py_ssize_t n_groups = off.shape[0] - 1, NS = N * S

    cdef cnp.ndarray[double, ndim=2, mode="c"] A = np.array(A0, dtype=np.float64, order="C")
    cdef cnp.ndarray[double, ndim=2, mode="c"] A_prev = A.copy()
    cdef cnp.ndarray[double, ndim=2, mode="c"] A_new = np.empty_like(A)
    cdef cnp.ndarray[double, ndim=2, mode="c"] B = np.empty_like(A)
    cdef cnp.ndarray[double, ndim=2, mode="c"] G = np.empty_like(A)
    cdef cnp.ndarray[double, ndim=1, mode="c"] R = np.empty(M)
    cdef cnp.ndarray[double, ndim=1, mode="c"] R_prev = np.empty(M)
    cdef cnp.ndarray[double, ndim=1, mode="c"] R_new = np.empty(M)
    cdef cnp.ndarray[double, ndim=1, mode="c"] RB = np.empty(M)
    cdef cnp.ndarray[double, ndim=1, mode="c"] trace = np.empty(max(max_iter, 1))

    cdef double* pA = &A[0, 0]
    cdef double* pAp = &A_prev[0, 0]
    cdef double* pAn = &A_new[0, 0]
    cdef double* pB = &B[0, 0]
    cdef double* pG = &G[0, 0]
    cdef double* pR = &R[0]
    cdef double* pRp = &R_prev[0]
    cdef double* pRn = &R_new[0]
    cdef double* pRB = &RB[0]
    cdef double* tmp
    cdef double rho, fB, f_new, F_new, F_old, bound, d, inner, sq
    cdef double t = step
    cdef Py_ssize_t k = 0, i, j, streak = 0
    cdef int status = 1

    with nogil:
        _residuals(&Xc[0, 0], &yc[0], pA, &ro[0], S, N, pR)
        for i in range(M):
            pRp[i] = pR[i]
        F_old = _smooth(pR, &wc[0], &ro[0], S) + lam * _penalty(
            pA, N, S, &mem[0], &off[0], &gw[0], n_groups)
        while k < max_iter:
            rho = k / (k + 3.0)
            for i in range(NS):
                pB[i] = pA[i] + rho * (pA[i] - pAp[i])
            for i in range(M):
                pRB[i] = pR[i] + rho * (pR[i] - pRp[i])
            fB = _smooth(pRB, &wc[0], &ro[0], S)
            _gradient(&Xc[0, 0], pRB, &wc[0], &ro[0], S, N, pG)
            while True:
                for i in range(NS):
                    pAn[i] = pB[i] - t * pG[i]
                for j in range(N):
                    _prox_row(pAn + j * S, &mem[0], &off[0], &gw[0], n_groups, lam * t)
                _residuals(&Xc[0, 0], &yc[0], pAn, &ro[0], S, N, pRn)
                f_new = _smooth(pRn, &wc[0], &ro[0], S)
                if not backtrack:
                    break
                inner = 0.0
                sq = 0.0
                for i in range(NS):
                    d = pAn[i] - pB[i]
                    inner += pG[i] * d
                    sq += d * d
                bound = fB + inner + sq / (2.0 * t)
                if f_new <= bound or not isfinite(f_new):
                    break
                t *= shrink
            F_new = f_new + lam * _penalty(pAn, N, S, &mem[0], &off[0], &gw[0], n_groups)
            trace[k] = F_new
            k += 1
            if not isfinite(F_new):
                status = -1
                break
            # rotate buffers: prev <- current <- new
            tmp = pAp
            pAp = pA
            pA = pAn
            pAn = tmp
            tmp = pRp
            pRp = pR
            pR = pRn
            pRn = tmp
            if fabs(F_new - F_old) < tol * max(fabs(F_old), 1e-300):
                streak += 1
            else:
                streak = 0
            F_old = F_new
            if streak >= patience:
                status = 0
                break

    out = np.empty((N, S))
    cdef double[:, ::1] ov = out
    for i in range(N):
        for j in range(S):
            ov[i, j] = pA[i * S + j]
    return out, trace[:k].copy(), k, status, t
