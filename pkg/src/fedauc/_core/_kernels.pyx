# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_fallback.py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, int8_t

cnp.import_array()


cdef inline uint64_t _mul_shoup(uint64_t a, uint64_t w, uint64_t ws, uint64_t q) nogil:
    # a < 2**32, w < q < 2**31, ws = floor(w * 2**32 / q)
    cdef uint64_t t = (a * ws) >> 32
    cdef uint64_t r = a * w - t * q
    if r >= q:
        r -= q
    return r


def label_histograms(scores, labels, asc_thresholds):
    cdef const double[::1] s = np.ascontiguousarray(scores, dtype=np.float64)
    cdef const int8_t[::1] y = np.ascontiguousarray(labels, dtype=np.int8)
    cdef const double[::1] asc = np.ascontiguousarray(asc_thresholds, dtype=np.float64)
    cdef Py_ssize_t k = asc.shape[0]
    pos_arr = np.zeros(k + 1, dtype=np.int64)
    neg_arr = np.zeros(k + 1, dtype=np.int64)
    cdef int64_t[::1] pos = pos_arr
    cdef int64_t[::1] neg = neg_arr
    cdef Py_ssize_t i, lo, hi, mid
    cdef double x
    with nogil:
        for i in range(s.shape[0]):
            x = s[i]
            # first index with asc[idx] >= x
            lo = 0
            hi = k
            while lo < hi:
                mid = (lo + hi) >> 1
                if asc[mid] < x:
                    lo = mid + 1
                else:
                    hi = mid
            if y[i] == 1:
                pos[k - lo] += 1
            else:
                neg[k - lo] += 1
    return pos_arr, neg_arr


def ntt_forward(cnp.ndarray a_arr, q_arr, psi_rev_arr, psi_rev_shoup_arr):
    cdef uint64_t[:, ::1] a = a_arr
    cdef const uint64_t[::1] q = np.ascontiguousarray(q_arr, dtype=np.uint64)
    cdef const uint64_t[:, ::1] psi = np.ascontiguousarray(psi_rev_arr, dtype=np.uint64)
    cdef const uint64_t[:, ::1] psis = np.ascontiguousarray(psi_rev_shoup_arr, dtype=np.uint64)
    cdef Py_ssize_t L = a.shape[0], n = a.shape[1]
    cdef Py_ssize_t l, t, m, i, j, j1
    cdef uint64_t qq, w, ws, u, v, d
    with nogil:
        for l in range(L):
            qq = q[l]
            t = n
            m = 1
            while m < n:
                t >>= 1
                for i in range(m):
                    j1 = 2 * i * t
                    w = psi[l, m + i]
                    ws = psis[l, m + i]
                    for j in range(j1, j1 + t):
                        u = a[l, j]
                        v = _mul_shoup(a[l, j + t], w, ws, qq)
                        d = u + v
                        if d >= qq:
                            d -= qq
                        a[l, j] = d
                        d = u + qq - v
                        if d >= qq:
                            d -= qq
                        a[l, j + t] = d
                m <<= 1
    return a_arr


def ntt_inverse(cnp.ndarray a_arr, q_arr, psi_inv_rev_arr, psi_inv_rev_shoup_arr,
                n_inv_arr, n_inv_shoup_arr):
    cdef uint64_t[:, ::1] a = a_arr
    cdef const uint64_t[::1] q = np.ascontiguousarray(q_arr, dtype=np.uint64)
    cdef const uint64_t[:, ::1] psi = np.ascontiguousarray(psi_inv_rev_arr, dtype=np.uint64)
    cdef const uint64_t[:, ::1] psis = np.ascontiguousarray(psi_inv_rev_shoup_arr, dtype=np.uint64)
    cdef const uint64_t[::1] ninv = np.ascontiguousarray(n_inv_arr, dtype=np.uint64)
    cdef const uint64_t[::1] ninvs = np.ascontiguousarray(n_inv_shoup_arr, dtype=np.uint64)
    cdef Py_ssize_t L = a.shape[0], n = a.shape[1]
    cdef Py_ssize_t l, t, m, h, i, j, j1
    cdef uint64_t qq, w, ws, u, v, d
    with nogil:
        for l in range(L):
            qq = q[l]
            t = 1
            m = n
            while m > 1:
                h = m >> 1
                j1 = 0
                for i in range(h):
                    w = psi[l, h + i]
                    ws = psis[l, h + i]
                    for j in range(j1, j1 + t):
                        u = a[l, j]
                        v = a[l, j + t]
                        d = u + v
                        if d >= qq:
                            d -= qq
                        a[l, j] = d
                        d = u + qq - v
                        if d >= qq:
                            d -= qq
                        a[l, j + t] = _mul_shoup(d, w, ws, qq)
                    j1 += 2 * t
                t <<= 1
                m = h
            for j in range(n):
                a[l, j] = _mul_shoup(a[l, j], ninv[l], ninvs[l], qq)
    return a_arr


def mul_pointwise(a_arr, b_arr, q_arr):
    cdef const uint64_t[:, ::1] a = np.ascontiguousarray(a_arr, dtype=np.uint64)
    cdef const uint64_t[:, ::1] b = np.ascontiguousarray(b_arr, dtype=np.uint64)
    cdef const uint64_t[::1] q = np.ascontiguousarray(q_arr, dtype=np.uint64)
    cdef Py_ssize_t L = a.shape[0], n = a.shape[1], l, j
    out_arr = np.empty((L, n), dtype=np.uint64)
    cdef uint64_t[:, ::1] out = out_arr
    with nogil:
        for l in range(L):
            for j in range(n):
                out[l, j] = (a[l, j] * b[l, j]) % q[l]
    return out_arr


def automorphism(a_arr, Py_ssize_t galois, q_arr):
    cdef const uint64_t[:, ::1] a = np.ascontiguousarray(a_arr, dtype=np.uint64)
    cdef const uint64_t[::1] q = np.ascontiguousarray(q_arr, dtype=np.uint64)
    cdef Py_ssize_t L = a.shape[0], n = a.shape[1], l, i, idx
    out_arr = np.empty((L, n), dtype=np.uint64)
    cdef uint64_t[:, ::1] out = out_arr
    cdef uint64_t x
    with nogil:
        for i in range(n):
            idx = (i * galois) % (2 * n)
            for l in range(L):
                x = a[l, i]
                if idx >= n:
                    out[l, idx - n] = 0 if x == 0 else q[l] - x
                else:
                    out[l, idx] = x
    return out_arr
