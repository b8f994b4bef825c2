import os
import subprocess
import sys

import numpy as np
import pytest

from hierlat import kernels

BACKENDS = kernels.available_backends()
needs_compiled = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")

CASES = [
    (kernels.KIND_DIAMOND, [1.0, 2.0, 0.5, 3.0], 4, True),
    (kernels.KIND_LP, [1.0, 0.25, 0.75, 1.5], 3, True),
    (kernels.KIND_LP, [-1.0, 1.0, 2.0], 2, True),
    (kernels.KIND_LP, [2.0, 1.0, 1.0, 0.5, 2.0], 4, True),
    (kernels.KIND_LP, [-2.0, 1.0, 3.0], 2, True),
    (kernels.KIND_LP, [3.0, 1.0, 1.0], 2, False),
    (kernels.KIND_LP, [-0.7, 0.4, 0.6, 1.0], 3, False),
]
IDS = ["diamond", "L1", "L-1", "L2", "L-2", "L3", "L-0.7"]


def _data(k, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.1, 5.0, size=(5000, k))
    pool = rng.uniform(0.1, 5.0, size=777)
    idx = rng.integers(0, pool.size, size=(5000, k))
    return X, pool, idx


@needs_compiled
@pytest.mark.parametrize("kind,params,k,exact", CASES, ids=IDS)
def test_backends_agree(kind, params, k, exact):
    X, pool, idx = _data(k)
    a = kernels.eval_rows(kind, params, X, backend=BACKENDS["numpy"])
    b = kernels.eval_rows(kind, params, X, backend=BACKENDS["cython"])
    ga = kernels.gather_eval(kind, params, pool, idx, backend=BACKENDS["numpy"])
    gb = kernels.gather_eval(kind, params, pool, idx, backend=BACKENDS["cython"])
    if exact:
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(ga, gb)
    else:
        np.testing.assert_allclose(a, b, rtol=1e-13)
        np.testing.assert_allclose(ga, gb, rtol=1e-13)


@pytest.mark.parametrize("kind,params,k,exact", CASES, ids=IDS)
def test_gather_matches_rows(kind, params, k, exact):
    _, pool, idx = _data(k, seed=1)
    for impl in BACKENDS.values():
        np.testing.assert_array_equal(
            kernels.gather_eval(kind, params, pool, idx, backend=impl),
            kernels.eval_rows(kind, params, pool[idx], backend=impl),
        )


def test_diamond_value():
    out = kernels.eval_rows(kernels.KIND_DIAMOND, [1, 1, 1, 1], np.array([[1.0, 1.0, 2.0, 2.0]]))
    assert out[0] == pytest.approx(1.5, abs=1e-15)


@pytest.mark.parametrize("impl", list(BACKENDS.values()), ids=list(BACKENDS))
def test_shape_errors(impl):
    with pytest.raises(ValueError):
        kernels.eval_rows(kernels.KIND_DIAMOND, [1, 1, 1], np.ones((3, 4)), backend=impl)
    with pytest.raises(ValueError):
        kernels.eval_rows(kernels.KIND_LP, [1.0, 1.0], np.ones((3, 2)), backend=impl)
    with pytest.raises(ValueError):
        kernels.eval_rows(7, [1.0], np.ones((3, 1)), backend=impl)


def test_general_exponent_dispatches_to_numpy():
    assert kernels._pick(kernels.KIND_LP, [3.0, 1.0], None) is BACKENDS["numpy"]
    assert kernels._pick(kernels.KIND_LP, [2.0, 1.0], None) is kernels._impl


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("0", None)])
def test_env_override(flag, expected):
    env = dict(os.environ, HIERLAT_PURE_PYTHON=flag)
    out = subprocess.run(
        [sys.executable, "-c", "from hierlat import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    ).stdout.strip()
    if expected is None:
        expected = "cython" if "cython" in BACKENDS else "numpy"
    assert out == expected
