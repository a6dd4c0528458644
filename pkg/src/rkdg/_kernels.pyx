# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled element kernels.  Same signatures as the numpy versions in _kernels_py."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef void _gemm_rm(char transb, int m, int n, int k, const double *A, int lda,
                   const double *B, int ldb, double *C, int ldc) noexcept nogil:
    """Row-major C (m x n) = A (m x k) op(B), with op(B) = B or B^T; done as the column-major C^T."""
    cdef char transa = b'N'
    cdef double one = 1.0, zero = 0.0
    # column-major view: C^T (n x m) = op(B)^T (n x k) A^T (k x m)
    dgemm(&transb, &transa, &n, &m, &k, &one, <double *>B, &ldb, <double *>A, &lda, &zero, C, &ldc)


def cell_eval(dofs, B, scale):
    """out[n, q, r] = scale[n] * sum_b B[q, b] dofs[n, r, b]"""
    cdef const double[:, :, ::1] U = np.ascontiguousarray(dofs, dtype=np.float64)
    cdef const double[:, ::1] M = np.ascontiguousarray(B, dtype=np.float64)
    cdef const double[::1] s = np.ascontiguousarray(np.broadcast_to(scale, (U.shape[0],)), dtype=np.float64)
    cdef Py_ssize_t n = U.shape[0], r = U.shape[1], nb = U.shape[2], nq = M.shape[0]
    out_arr = np.empty((n, nq, r))
    if n == 0 or nq == 0:
        return out_arr
    cdef double[:, :, ::1] out = out_arr
    tmp_arr = np.empty((n * r, nq)) if r > 1 else out_arr.reshape(n, nq)
    cdef double[:, ::1] tmp = tmp_arr
    cdef Py_ssize_t c, q, k
    cdef double sc
    with nogil:
        # (n r) x nb times (nq x nb)^T
        _gemm_rm(b'T', <int>(n * r), <int>nq, <int>nb, &U[0, 0, 0], <int>nb, &M[0, 0], <int>nb,
                 &tmp[0, 0], <int>nq)
        if r == 1:
            for c in range(n):
                sc = s[c]
                for q in range(nq):
                    out[c, q, 0] *= sc
        else:
            for c in range(n):
                sc = s[c]
                for k in range(r):
                    for q in range(nq):
                        out[c, q, k] = tmp[c * r + k, q] * sc
    return out_arr


def cell_test(A, B):
    """out[n, r, b] = sum_q A[n, q, r] B[q, b]"""
    cdef const double[:, :, ::1] X = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[:, ::1] M = np.ascontiguousarray(B, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], nq = X.shape[1], r = X.shape[2], nb = M.shape[1]
    out_arr = np.empty((n, r, nb))
    if n == 0 or nb == 0:
        return out_arr
    if nq == 0:
        out_arr.fill(0.0)
        return out_arr
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] T
    cdef Py_ssize_t c, q, k
    if r == 1:
        with nogil:
            _gemm_rm(b'N', <int>n, <int>nb, <int>nq, &X[0, 0, 0], <int>nq, &M[0, 0], <int>nb,
                     &out[0, 0, 0], <int>nb)
        return out_arr
    T_arr = np.empty((n * r, nq))
    T = T_arr
    with nogil:
        for c in range(n):
            for q in range(nq):
                for k in range(r):
                    T[c * r + k, q] = X[c, q, k]
        _gemm_rm(b'N', <int>(n * r), <int>nb, <int>nq, &T[0, 0], <int>nq, &M[0, 0], <int>nb,
                 &out[0, 0, 0], <int>nb)
    return out_arr


cdef inline Py_ssize_t _onb_size(Py_ssize_t i, Py_ssize_t d) nogil:
    cdef Py_ssize_t out = 1, j
    for j in range(d):
        out *= i + 1
    return out


def modal_values(dofs, int order, int dim, volumes):
    """Decay exponent s of component 0 for every cell (1000 constant, 100 linear)."""
    cdef const double[:, :, ::1] U = np.ascontiguousarray(dofs, dtype=np.float64)
    cdef const double[::1] vol = np.ascontiguousarray(volumes, dtype=np.float64)
    cdef Py_ssize_t n = U.shape[0], P = order
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    q_arr = np.zeros(P + 1)
    b2_arr = np.zeros(P + 1)
    cdef double[::1] q = q_arr
    cdef double[::1] b2 = b2_arr
    cdef Py_ssize_t c, i, k, nof, sig, row
    cdef double f, l2, maxQ, factor, u, s00, s01, s11, r0, r1, x, y, det
    if P == 0:
        out_arr.fill(1000.0)
        return out_arr
    # weights of the reference decay only depend on the order
    f = 0.0
    k = 1
    for i in range(1, P + 1):
        nof = _onb_size(i, dim) - k
        b2[i] = 0.0
        while k < _onb_size(i, dim):
            b2[i] += (1.0 / i) ** (2 * P) / nof
            f += (1.0 / i) ** (2 * P) / nof
            k += 1
    with nogil:
        for c in range(n):
            factor = 1.0 / sqrt(vol[c])
            q[0] = U[c, 0, 0] * U[c, 0, 0]
            l2 = 0.0
            k = 1
            for i in range(1, P + 1):
                q[i] = 0.0
                nof = _onb_size(i, dim) - k
                while k < _onb_size(i, dim):
                    u = U[c, 0, k]
                    q[i] += u * u / nof
                    l2 += u * u / nof
                    k += 1
            for i in range(1, P + 1):
                q[i] = sqrt(q[i] + l2 * b2[i] / f) / factor
            maxQ = q[P] if q[P] > q[P - 1] else q[P - 1]
            sig = 0
            for i in range(P, 0, -1):
                if q[i] > maxQ:
                    maxQ = q[i]
                if maxQ > 1e-14:
                    sig = i
                    break
            if sig == 0:
                out[c] = 1000.0
                continue
            if sig == 1:
                out[c] = 100.0
                continue
            # least squares for log(maxQ_r) = a - s log(r+1), rows r = sig-1 .. 0
            s00 = 0.0
            s01 = 0.0
            s11 = 0.0
            r0 = 0.0
            r1 = 0.0
            for row in range(sig - 1, -1, -1):
                if q[row + 1] > maxQ:
                    maxQ = q[row + 1]
                x = -log(row + 1.0)
                y = log(maxQ)
                s00 += 1.0
                s01 += x
                s11 += x * x
                r0 += y
                r1 += x * y
            det = s00 * s11 - s01 * s01
            out[c] = (s00 * r1 - s01 * r0) / det
    return out_arr
