"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_kernels.pyx`` with the same signature
and bit-identical output; the package picks one at import time.

Residue arrays are ``uint64`` with shape ``(L, n)``, one row per RNS prime.
All primes are below 2**31, so a product of two residues fits in 64 bits.
"""

import numpy as np


def label_histograms(scores, labels, asc_thresholds):
    """Bucket samples by how many thresholds are >= their score.

    Returns ``(pos, neg)`` int64 arrays of length ``len(asc_thresholds) + 1``.
    """
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int8)
    asc = np.ascontiguousarray(asc_thresholds, dtype=np.float64)
    nb = asc.shape[0] + 1
    bucket = asc.shape[0] - np.searchsorted(asc, scores, side="left")
    pos = np.bincount(bucket[labels == 1], minlength=nb).astype(np.int64)
    neg = np.bincount(bucket[labels != 1], minlength=nb).astype(np.int64)
    return pos, neg


def ntt_forward(a, q, psi_rev, psi_rev_shoup):
    """In-place negacyclic forward NTT; output in bit-reversed order."""
    del psi_rev_shoup
    L, n = a.shape
    qq = q.reshape(L, 1, 1)
    t = n
    m = 1
    while m < n:
        t //= 2
        v = a.reshape(L, m, 2, t)
        s = psi_rev[:, m:2 * m].reshape(L, m, 1)
        u = v[:, :, 0, :].copy()
        w = (v[:, :, 1, :] * s) % qq
        v[:, :, 0, :] = (u + w) % qq
        v[:, :, 1, :] = (u + qq - w) % qq
        m *= 2
    return a


def ntt_inverse(a, q, psi_inv_rev, psi_inv_rev_shoup, n_inv, n_inv_shoup):
    """In-place inverse of :func:`ntt_forward`; output in natural order."""
    del psi_inv_rev_shoup, n_inv_shoup
    L, n = a.shape
    qq = q.reshape(L, 1, 1)
    t = 1
    m = n
    while m > 1:
        h = m // 2
        v = a.reshape(L, h, 2, t)
        s = psi_inv_rev[:, h:2 * h].reshape(L, h, 1)
        u = v[:, :, 0, :].copy()
        w = v[:, :, 1, :].copy()
        v[:, :, 0, :] = (u + w) % qq
        v[:, :, 1, :] = (((u + qq - w) % qq) * s) % qq
        t *= 2
        m = h
    a[:] = (a * n_inv.reshape(L, 1)) % q.reshape(L, 1)
    return a


def mul_pointwise(a, b, q):
    return (a * b) % q.reshape(-1, 1)


def automorphism(a, galois, q):
    """Apply X -> X**galois to each coefficient-form row of ``a``."""
    L, n = a.shape
    idx = (np.arange(n, dtype=np.int64) * galois) % (2 * n)
    neg = idx >= n
    dest = idx % n
    out = np.empty_like(a)
    qq = q.reshape(L, 1)
    vals = np.where(neg[None, :], (qq - a) % qq, a)
    out[:, dest] = vals
    return out
