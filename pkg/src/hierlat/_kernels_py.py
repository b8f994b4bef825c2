"""Pure numpy implementation of the kernel interface.

Accumulation is sequential over the arity axis (not ``np.sum``) so results
match the compiled kernels bit for bit.
"""
import numpy as np

KIND_DIAMOND = 0
KIND_LP = 1

BACKEND = "numpy"


def _diamond(w, x1, x2, x3, x4):
    return (1.0 / (1.0 / (w[0] * x1) + 1.0 / (w[1] * x2))
            + 1.0 / (1.0 / (w[2] * x3) + 1.0 / (w[3] * x4)))


def _lp(p, w, cols):
    k = len(cols)
    if p == 1.0:
        acc = w[0] * cols[0]
        for j in range(1, k):
            acc = acc + w[j] * cols[j]
        return acc
    if p == -1.0:
        acc = 1.0 / (w[0] * cols[0])
        for j in range(1, k):
            acc = acc + 1.0 / (w[j] * cols[j])
        return 1.0 / acc
    if p == 2.0 or p == -2.0:
        t = w[0] * cols[0]
        acc = t * t if p > 0 else 1.0 / (t * t)
        for j in range(1, k):
            t = w[j] * cols[j]
            acc = acc + (t * t if p > 0 else 1.0 / (t * t))
        return np.sqrt(acc) if p > 0 else 1.0 / np.sqrt(acc)
    acc = np.power(w[0] * cols[0], p)
    for j in range(1, k):
        acc = acc + np.power(w[j] * cols[j], p)
    return np.power(acc, 1.0 / p)


def _apply(kind, params, cols):
    k = len(cols)
    if kind == KIND_DIAMOND:
        if k != 4 or len(params) != 4:
            raise ValueError("diamond kernel needs k = 4 and 4 weights")
        return _diamond(params, *cols)
    if kind == KIND_LP:
        if len(params) != k + 1:
            raise ValueError("lp kernel needs p followed by k weights")
        return _lp(float(params[0]), params[1:], cols)
    raise ValueError(f"unknown kernel kind {kind}")


def eval_rows(kind, params, X, out):
    X = np.asarray(X, dtype=np.float64)
    if out.shape[0] != X.shape[0]:
        raise ValueError("output length does not match row count")
    cols = [X[:, j] for j in range(X.shape[1])]
    out[:] = _apply(kind, np.asarray(params, dtype=np.float64), cols)


def gather_eval(kind, params, pool, idx, out):
    if out.shape[0] != idx.shape[0]:
        raise ValueError("output length does not match index rows")
    cols = [pool[idx[:, j]] for j in range(idx.shape[1])]
    out[:] = _apply(kind, np.asarray(params, dtype=np.float64), cols)
