# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops for the built-in combiners.

Mirrors ``hierlat._kernels_py`` operation for operation so both backends
produce identical doubles. Loops run without the GIL so the engine can
spread chunks over threads.
"""
from libc.math cimport pow, sqrt

cdef enum:
    KIND_DIAMOND = 0
    KIND_LP = 1

BACKEND = "cython"


cdef inline double _diamond(const double* w, double x1, double x2,
                            double x3, double x4) noexcept nogil:
    return (1.0 / (1.0 / (w[0] * x1) + 1.0 / (w[1] * x2))
            + 1.0 / (1.0 / (w[2] * x3) + 1.0 / (w[3] * x4)))


cdef inline double _lp_row(double p, const double* w, const double* x,
                           Py_ssize_t k) noexcept nogil:
    cdef Py_ssize_t j
    cdef double acc
    if p == 1.0:
        acc = w[0] * x[0]
        for j in range(1, k):
            acc = acc + w[j] * x[j]
        return acc
    if p == -1.0:
        acc = 1.0 / (w[0] * x[0])
        for j in range(1, k):
            acc = acc + 1.0 / (w[j] * x[j])
        return 1.0 / acc
    cdef double t
    if p == 2.0:
        t = w[0] * x[0]
        acc = t * t
        for j in range(1, k):
            t = w[j] * x[j]
            acc = acc + t * t
        return sqrt(acc)
    if p == -2.0:
        t = w[0] * x[0]
        acc = 1.0 / (t * t)
        for j in range(1, k):
            t = w[j] * x[j]
            acc = acc + 1.0 / (t * t)
        return 1.0 / sqrt(acc)
    acc = pow(w[0] * x[0], p)
    for j in range(1, k):
        acc = acc + pow(w[j] * x[j], p)
    return pow(acc, 1.0 / p)


def eval_rows(int kind, const double[::1] params, const double[:, ::1] X,
              double[::1] out):
    """Evaluate the combiner on every row of ``X`` into ``out``."""
    cdef Py_ssize_t m = X.shape[0], k = X.shape[1], i
    cdef double p
    if out.shape[0] != m:
        raise ValueError("output length does not match row count")
    if kind == KIND_DIAMOND:
        if k != 4 or params.shape[0] != 4:
            raise ValueError("diamond kernel needs k = 4 and 4 weights")
        with nogil:
            for i in range(m):
                out[i] = _diamond(&params[0], X[i, 0], X[i, 1], X[i, 2], X[i, 3])
    elif kind == KIND_LP:
        if params.shape[0] != k + 1:
            raise ValueError("lp kernel needs p followed by k weights")
        p = params[0]
        with nogil:
            for i in range(m):
                out[i] = _lp_row(p, &params[1], &X[i, 0], k)
    else:
        raise ValueError(f"unknown kernel kind {kind}")


def gather_eval(int kind, const double[::1] params, const double[::1] pool,
                const long long[:, ::1] idx, double[::1] out):
    """Evaluate the combiner on tuples ``pool[idx[i, :]]`` into ``out``."""
    cdef Py_ssize_t m = idx.shape[0], k = idx.shape[1], i, j
    cdef Py_ssize_t npool = pool.shape[0]
    cdef double buf[64]
    cdef double p
    if out.shape[0] != m:
        raise ValueError("output length does not match index rows")
    if k > 64:
        raise ValueError("arity above 64 not supported by the compiled kernel")
    if kind == KIND_DIAMOND:
        if k != 4 or params.shape[0] != 4:
            raise ValueError("diamond kernel needs k = 4 and 4 weights")
        with nogil:
            for i in range(m):
                out[i] = _diamond(&params[0], pool[idx[i, 0]], pool[idx[i, 1]],
                                  pool[idx[i, 2]], pool[idx[i, 3]])
    elif kind == KIND_LP:
        if params.shape[0] != k + 1:
            raise ValueError("lp kernel needs p followed by k weights")
        p = params[0]
        with nogil:
            for i in range(m):
                for j in range(k):
                    buf[j] = pool[idx[i, j]]
                out[i] = _lp_row(p, &params[1], buf, k)
    else:
        raise ValueError(f"unknown kernel kind {kind}")
