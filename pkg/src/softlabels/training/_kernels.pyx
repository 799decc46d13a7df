# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled training kernels.

Fused forward/backward for the two-hidden-layer ReLU net, numerically
interchangeable with ``_kernels_py``. Matrix products go through BLAS
(the same engine behind NumPy's ``@``); everything the fallback spreads
over a chain of vectorized ops (bias, ReLU, softmax, loss, masking, bias
gradients) is fused into single C passes with no intermediate arrays.
"""

from libc.math cimport exp, log

import numpy as np

from scipy.linalg.cython_blas cimport dgemm

BACKEND_NAME = "c"


cdef void _matmul(bint ta, bint tb, int m, int n, int k,
                  double* a, double* b, double* c) noexcept nogil:
    """C (m x n, row-major) = opA(A) @ opB(B), opX = transpose when the flag is set.

    Row-major data is its own transpose in BLAS's column-major view, so the
    call computes C^T = opB(B)^T @ opA(A)^T with the operands swapped.
    """
    cdef char at = b'T' if ta else b'N'
    cdef char bt = b'T' if tb else b'N'
    cdef int lda = m if ta else k
    cdef int ldb = k if tb else n
    cdef double one = 1.0, zero = 0.0
    dgemm(&bt, &at, &n, &m, &k, &one, b, &ldb, a, &lda, &zero, c, &n)


cdef void _bias_relu(double[:, ::1] h, double[::1] b) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(h.shape[0]):
        for j in range(h.shape[1]):
            h[i, j] += b[j]
            if h[i, j] < 0.0:
                h[i, j] = 0.0


cdef void _mask_colsum(double[:, ::1] g, double[:, ::1] act, double[::1] gb) noexcept nogil:
    """Zero gradient entries where the ReLU was inactive; accumulate bias grads."""
    cdef Py_ssize_t i, j
    for i in range(g.shape[0]):
        for j in range(g.shape[1]):
            if act[i, j] <= 0.0:
                g[i, j] = 0.0
            gb[j] += g[i, j]


def forward(x, w1, b1, w2, b2, w3, b3):
    """Batch softmax probabilities, shape (B, K)."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] w1v = w1, w2v = w2, w3v = w3
    cdef double[::1] b1v = b1, b2v = b2, b3v = b3
    cdef int nb = <int> xv.shape[0], nd = <int> xv.shape[1]
    cdef int nh1 = <int> w1v.shape[1], nh2 = <int> w2v.shape[1], nk = <int> w3v.shape[1]

    h1_arr = np.empty((nb, nh1))
    h2_arr = np.empty((nb, nh2))
    probs_arr = np.empty((nb, nk))
    cdef double[:, ::1] h1 = h1_arr, h2 = h2_arr, probs = probs_arr
    cdef Py_ssize_t i, k
    cdef double zmax, sez

    with nogil:
        _matmul(0, 0, nb, nh1, nd, &xv[0, 0], &w1v[0, 0], &h1[0, 0])
        _bias_relu(h1, b1v)
        _matmul(0, 0, nb, nh2, nh1, &h1[0, 0], &w2v[0, 0], &h2[0, 0])
        _bias_relu(h2, b2v)
        _matmul(0, 0, nb, nk, nh2, &h2[0, 0], &w3v[0, 0], &probs[0, 0])
        for i in range(nb):
            zmax = -1e300
            for k in range(nk):
                probs[i, k] += b3v[k]
                if probs[i, k] > zmax:
                    zmax = probs[i, k]
            sez = 0.0
            for k in range(nk):
                probs[i, k] = exp(probs[i, k] - zmax)
                sez += probs[i, k]
            for k in range(nk):
                probs[i, k] /= sez
    return probs_arr


def forward_backward(x, targets, w1, b1, w2, b2, w3, b3):
    """Fused pass: mean loss, probabilities, and all gradients of the mean.

    Loss is mean_b -sum_k t_bk log softmax(z_b)_k computed via log-sum-exp;
    gradients (including the input gradient) are of this mean.
    """
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] tv = np.ascontiguousarray(targets, dtype=np.float64)
    cdef double[:, ::1] w1v = w1, w2v = w2, w3v = w3
    cdef double[::1] b1v = b1, b2v = b2, b3v = b3
    cdef int nb = <int> xv.shape[0], nd = <int> xv.shape[1]
    cdef int nh1 = <int> w1v.shape[1], nh2 = <int> w2v.shape[1], nk = <int> w3v.shape[1]

    h1_arr = np.empty((nb, nh1))
    h2_arr = np.empty((nb, nh2))
    probs_arr = np.empty((nb, nk))
    dz_arr = np.empty((nb, nk))
    dh2_arr = np.empty((nb, nh2))
    dh1_arr = np.empty((nb, nh1))
    gw1_arr = np.empty((nd, nh1))
    gb1_arr = np.zeros(nh1)
    gw2_arr = np.empty((nh1, nh2))
    gb2_arr = np.zeros(nh2)
    gw3_arr = np.empty((nh2, nk))
    gb3_arr = np.zeros(nk)
    gx_arr = np.empty((nb, nd))

    cdef double[:, ::1] h1 = h1_arr, h2 = h2_arr, probs = probs_arr
    cdef double[:, ::1] dz = dz_arr, dh2 = dh2_arr, dh1 = dh1_arr
    cdef double[:, ::1] gw1 = gw1_arr, gw2 = gw2_arr, gw3 = gw3_arr, gx = gx_arr
    cdef double[::1] gb1 = gb1_arr, gb2 = gb2_arr, gb3 = gb3_arr

    cdef Py_ssize_t i, k
    cdef double zmax, sez, lse, loss = 0.0
    cdef double inv_b = 1.0 / nb

    with nogil:
        _matmul(0, 0, nb, nh1, nd, &xv[0, 0], &w1v[0, 0], &h1[0, 0])
        _bias_relu(h1, b1v)
        _matmul(0, 0, nb, nh2, nh1, &h1[0, 0], &w2v[0, 0], &h2[0, 0])
        _bias_relu(h2, b2v)
        _matmul(0, 0, nb, nk, nh2, &h2[0, 0], &w3v[0, 0], &probs[0, 0])
        for i in range(nb):
            zmax = -1e300
            for k in range(nk):
                probs[i, k] += b3v[k]
                if probs[i, k] > zmax:
                    zmax = probs[i, k]
            sez = 0.0
            for k in range(nk):
                sez += exp(probs[i, k] - zmax)
            lse = zmax + log(sez)
            for k in range(nk):
                loss += tv[i, k] * (lse - probs[i, k])
                probs[i, k] = exp(probs[i, k] - lse)
                dz[i, k] = (probs[i, k] - tv[i, k]) * inv_b
                gb3[k] += dz[i, k]
        _matmul(1, 0, nh2, nk, nb, &h2[0, 0], &dz[0, 0], &gw3[0, 0])
        _matmul(0, 1, nb, nh2, nk, &dz[0, 0], &w3v[0, 0], &dh2[0, 0])
        _mask_colsum(dh2, h2, gb2)
        _matmul(1, 0, nh1, nh2, nb, &h1[0, 0], &dh2[0, 0], &gw2[0, 0])
        _matmul(0, 1, nb, nh1, nh2, &dh2[0, 0], &w2v[0, 0], &dh1[0, 0])
        _mask_colsum(dh1, h1, gb1)
        _matmul(1, 0, nd, nh1, nb, &xv[0, 0], &dh1[0, 0], &gw1[0, 0])
        _matmul(0, 1, nb, nd, nh1, &dh1[0, 0], &w1v[0, 0], &gx[0, 0])
        loss *= inv_b

    return (loss, probs_arr, gw1_arr, gb1_arr, gw2_arr, gb2_arr,
            gw3_arr, gb3_arr, gx_arr)
