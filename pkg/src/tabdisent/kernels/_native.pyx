# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend.

Same contract as numpy_ops: C-contiguous float32/float64 in, same dtype
out. Matrix products go straight to BLAS through scipy's cython bindings
(the row-major product is computed as the column-major product of the
swapped operands); softmax, LeakyReLU and the Adam update are fused
single-pass loops, which is where this backend earns its keep on the
small per-batch tensors the model pushes through them.
"""

import numpy as np

cimport numpy as cnp
from cython cimport floating
from libc.math cimport exp, sqrt
from scipy.linalg.cython_blas cimport dgemm, sgemm


cdef void _gemm(floating[:, ::1] a, floating[:, ::1] b, floating[:, ::1] out,
                bint ta, bint tb) noexcept nogil:
    # Row-major out = op(a) @ op(b) via BLAS on the transposed view:
    # out^T = op(b)^T @ op(a)^T, everything reinterpreted column-major.
    cdef int p = a.shape[1] if ta else a.shape[0]
    cdef int r = a.shape[0] if ta else a.shape[1]
    cdef int q = b.shape[0] if tb else b.shape[1]
    cdef char trans_b = b'T' if tb else b'N'
    cdef char trans_a = b'T' if ta else b'N'
    cdef int lda = b.shape[1]
    cdef int ldb = a.shape[1]
    cdef int ldc = q
    cdef floating one = 1.0
    cdef floating zero = 0.0
    if floating is double:
        dgemm(&trans_b, &trans_a, &q, &p, &r, &one, &b[0, 0], &lda,
              &a[0, 0], &ldb, &zero, &out[0, 0], &ldc)
    else:
        sgemm(&trans_b, &trans_a, &q, &p, &r, &one, &b[0, 0], &lda,
              &a[0, 0], &ldb, &zero, &out[0, 0], &ldc)


cdef void _gemm_batched(floating[:, :, ::1] a, floating[:, :, ::1] b,
                        floating[:, :, ::1] out, bint ta, bint tb) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(a.shape[0]):
        _gemm(a[i], b[i], out[i], ta, tb)


cdef void _gemm_shared_b(floating[:, :, ::1] a, floating[:, ::1] b,
                         floating[:, :, ::1] out, bint ta, bint tb) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(a.shape[0]):
        _gemm(a[i], b, out[i], ta, tb)


cdef void _gemm_shared_a(floating[:, ::1] a, floating[:, :, ::1] b,
                         floating[:, :, ::1] out, bint ta, bint tb) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(b.shape[0]):
        _gemm(a, b[i], out[i], ta, tb)


def matmul(a, b, bint transpose_a=False, bint transpose_b=False):
    # Dispatch mirrors the numpy backend: 2-D/3-D operands in any mix,
    # the 2-D side broadcast across the batch. Never index .shape past
    # ndim; bounds checking is off module-wide.
    cdef int na = a.ndim
    cdef int nb = b.ndim
    cdef Py_ssize_t p, q, batch
    if na not in (2, 3) or nb not in (2, 3):
        raise ValueError(f"matmul operands must be 2-D or 3-D, got {na}-D and {nb}-D")
    p = a.shape[na - 1] if transpose_a else a.shape[na - 2]
    q = b.shape[nb - 2] if transpose_b else b.shape[nb - 1]
    if na == 2 and nb == 2:
        out2 = np.empty((p, q), dtype=a.dtype)
        if a.dtype == np.float64:
            _gemm[double](a, b, out2, transpose_a, transpose_b)
        else:
            _gemm[float](a, b, out2, transpose_a, transpose_b)
        return out2
    batch = a.shape[0] if na == 3 else b.shape[0]
    out3 = np.empty((batch, p, q), dtype=a.dtype)
    if na == 3 and nb == 3:
        if a.dtype == np.float64:
            _gemm_batched[double](a, b, out3, transpose_a, transpose_b)
        else:
            _gemm_batched[float](a, b, out3, transpose_a, transpose_b)
    elif na == 3:
        if a.dtype == np.float64:
            _gemm_shared_b[double](a, b, out3, transpose_a, transpose_b)
        else:
            _gemm_shared_b[float](a, b, out3, transpose_a, transpose_b)
    else:
        if a.dtype == np.float64:
            _gemm_shared_a[double](a, b, out3, transpose_a, transpose_b)
        else:
            _gemm_shared_a[float](a, b, out3, transpose_a, transpose_b)
    return out3


cdef void _softmax_rows(floating[:, ::1] x, floating[:, ::1] y) noexcept nogil:
    cdef Py_ssize_t i, j, n = x.shape[1]
    cdef floating hi, s
    for i in range(x.shape[0]):
        hi = x[i, 0]
        for j in range(1, n):
            if x[i, j] > hi:
                hi = x[i, j]
        s = 0.0
        for j in range(n):
            y[i, j] = exp(x[i, j] - hi)
            s += y[i, j]
        for j in range(n):
            y[i, j] /= s


cdef void _softmax_rows_backward(floating[:, ::1] y, floating[:, ::1] gy,
                                 floating[:, ::1] gx) noexcept nogil:
    cdef Py_ssize_t i, j, n = y.shape[1]
    cdef floating inner
    for i in range(y.shape[0]):
        inner = 0.0
        for j in range(n):
            inner += y[i, j] * gy[i, j]
        for j in range(n):
            gx[i, j] = y[i, j] * (gy[i, j] - inner)


def softmax_lastdim(x):
    # wraparound is off module-wide, so no negative shape indexing here.
    out = np.empty_like(x)
    cols = x.shape[x.ndim - 1]
    x2 = x.reshape(-1, cols)
    y2 = out.reshape(-1, cols)
    if x.dtype == np.float64:
        _softmax_rows[double](x2, y2)
    else:
        _softmax_rows[float](x2, y2)
    return out


def softmax_lastdim_backward(y, grad_y):
    out = np.empty_like(y)
    cols = y.shape[y.ndim - 1]
    if y.dtype == np.float64:
        _softmax_rows_backward[double](y.reshape(-1, cols), grad_y.reshape(-1, cols),
                                       out.reshape(-1, cols))
    else:
        _softmax_rows_backward[float](y.reshape(-1, cols), grad_y.reshape(-1, cols),
                                      out.reshape(-1, cols))
    return out


cdef void _leaky(floating[::1] x, floating[::1] y, floating slope) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        y[i] = x[i] if x[i] >= 0 else x[i] * slope


cdef void _leaky_backward(floating[::1] x, floating[::1] gy, floating[::1] gx,
                          floating slope) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        gx[i] = gy[i] if x[i] >= 0 else gy[i] * slope


def leaky_relu(x, negative_slope):
    out = np.empty_like(x)
    if x.dtype == np.float64:
        _leaky[double](x.reshape(-1), out.reshape(-1), negative_slope)
    else:
        _leaky[float](x.reshape(-1), out.reshape(-1), negative_slope)
    return out


def leaky_relu_backward(x, grad_y, negative_slope):
    out = np.empty_like(x)
    if x.dtype == np.float64:
        _leaky_backward[double](x.reshape(-1), grad_y.reshape(-1), out.reshape(-1),
                                negative_slope)
    else:
        _leaky_backward[float](x.reshape(-1), grad_y.reshape(-1), out.reshape(-1),
                               negative_slope)
    return out


cdef void _adam(floating[::1] p, floating[::1] g, floating[::1] m, floating[::1] v,
                double lr, double beta1, double beta2, double eps,
                double bc1, double bc2) noexcept nogil:
    # bc1/bc2 are the precomputed bias-correction denominators 1 - beta^t.
    cdef Py_ssize_t i
    cdef double mi, vi
    for i in range(p.shape[0]):
        mi = beta1 * m[i] + (1.0 - beta1) * g[i]
        vi = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        m[i] = <floating> mi
        v[i] = <floating> vi
        p[i] -= <floating> (lr * (mi / bc1) / (sqrt(vi / bc2) + eps))


def adam_update(param, grad, m, v, double lr, double beta1, double beta2,
                double eps, long step):
    cdef double bc1 = 1.0 - beta1**step
    cdef double bc2 = 1.0 - beta2**step
    if param.dtype == np.float64:
        _adam[double](param.reshape(-1), grad.reshape(-1), m.reshape(-1),
                      v.reshape(-1), lr, beta1, beta2, eps, bc1, bc2)
    else:
        _adam[float](param.reshape(-1), grad.reshape(-1), m.reshape(-1),
                     v.reshape(-1), lr, beta1, beta2, eps, bc1, bc2)
