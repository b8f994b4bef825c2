"""Backend selection for the hot evaluation loops.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy twin in ``_kernels_py``. Set ``HIERLAT_PURE_PYTHON=1`` to force the
fallback. Both expose ``eval_rows`` and ``gather_eval`` with the same
signature and, for diamond and p = +/-1 combiners, identical results.
"""
import os

import numpy as np

from . import _kernels_py

KIND_DIAMOND = _kernels_py.KIND_DIAMOND
KIND_LP = _kernels_py.KIND_LP


def _select():
    if os.environ.get("HIERLAT_PURE_PYTHON", "").strip() not in ("", "0"):
        return _kernels_py
    try:
        from . import _kernels
    except ImportError:
        return _kernels_py
    return _kernels


_impl = _select()
BACKEND = _impl.BACKEND


def available_backends():
    """Return the kernel modules importable in this environment, by name."""
    out = {"numpy": _kernels_py}
    try:
        from . import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out


# Exponents with a dedicated loop in the compiled kernel. For any other p the
# compiled path calls libm pow per element, which is several times slower
# than numpy's vectorized power, so the default dispatch uses numpy there.
_COMPILED_EXPONENTS = (1.0, -1.0, 2.0, -2.0)


def _pick(kind, params, backend):
    if backend is not None:
        return backend
    if kind == KIND_LP and float(params[0]) not in _COMPILED_EXPONENTS:
        return _kernels_py
    return _impl


def eval_rows(kind, params, X, backend=None):
    impl = _pick(kind, params, backend)
    X = np.ascontiguousarray(X, dtype=np.float64)
    out = np.empty(X.shape[0], dtype=np.float64)
    impl.eval_rows(kind, np.ascontiguousarray(params, dtype=np.float64), X, out)
    return out


def gather_eval(kind, params, pool, idx, backend=None):
    impl = _pick(kind, params, backend)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    out = np.empty(idx.shape[0], dtype=np.float64)
    impl.gather_eval(
        kind,
        np.ascontiguousarray(params, dtype=np.float64),
        np.ascontiguousarray(pool, dtype=np.float64),
        idx,
        out,
    )
    return out
