import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hierlat.combiner import (
    CompositionSpec,
    compose,
    diamond,
    finite_difference_gradient,
    from_function,
    identity,
    lp_combiner,
    mean_combiner,
    min_combiner,
    projection_combiner,
)
from hierlat.errors import (
    BoundaryError,
    DomainError,
    NormalizationError,
    SpecError,
    UnsupportedExponentError,
    WeightError,
)

positive = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False, allow_infinity=False)
vec4 = st.lists(positive, min_size=4, max_size=4)
# the finite-difference step is absolute below |x| = 1, so compare where the
# curvature scale of the map is not far below that step
moderate4 = st.lists(st.floats(0.1, 10), min_size=4, max_size=4)
scale_t = st.floats(min_value=1e-2, max_value=1e2)
exponents = st.sampled_from([-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0])


def folded_diamond(w):
    """L1 over two weighted series pairs."""
    spec = CompositionSpec(
        outer=lp_combiner([1.0, 1.0], 1.0),
        inner=[lp_combiner(w[:2], -1.0), lp_combiner(w[2:], -1.0)],
        index_sets=[[0, 1], [2, 3]],
    )
    return compose(spec)


class TestEval:
    def test_diamond_unit_weights_at_ones(self):
        assert diamond([1, 1, 1, 1]).eval([1, 1, 1, 1]) == 1.0

    def test_diamond_t1_weights_at_ones(self):
        assert diamond([2, 2 / 3, 1, 1]).eval(np.ones(4)) == pytest.approx(1.0, abs=1e-15)

    def test_mean_midpoint(self):
        assert mean_combiner(2).eval([3, 5]) == 4.0

    def test_diamond_homogeneous_at_two(self):
        assert diamond().eval([2, 2, 2, 2]) == 2.0

    def test_lp_parallel_rule(self):
        assert lp_combiner([1, 1], 1).eval([3, 4]) == 7.0

    def test_lp_series_rule(self):
        assert lp_combiner([1, 1], -1).eval([3, 6]) == pytest.approx(2.0, rel=1e-15)

    def test_lp_euclidean(self):
        assert lp_combiner([1, 1], 2).eval([3, 4]) == 5.0

    def test_min_and_projection(self):
        assert min_combiner(3).eval([3, 1, 2]) == 1.0
        assert projection_combiner(2, 1).eval([3, 7]) == 7.0

    def test_eval_is_bit_deterministic(self):
        rng = np.random.default_rng(1)
        X = 0.1 + rng.random((1000, 4))
        c = diamond([1.3, 0.7, 2.0, 0.9])
        assert np.array_equal(c.eval_batch(X), c.eval_batch(X.copy()))

    def test_threads_agree_with_serial(self):
        rng = np.random.default_rng(2)
        X = 0.1 + rng.random((4000, 4))
        c = diamond()
        serial = c.eval_batch(X)
        with ThreadPoolExecutor(4) as ex:
            parts = list(ex.map(lambda s: c.eval_batch(X[s : s + 1000]), range(0, 4000, 1000)))
        assert np.array_equal(np.concatenate(parts), serial)


class TestDomain:
    def test_zero_conductance_rejected(self):
        with pytest.raises(DomainError, match="outside domain"):
            diamond().eval([1, 0, 1, 1])

    def test_negative_rejected_not_nan(self):
        with pytest.raises(DomainError):
            lp_combiner([1, 1], -1).eval_batch(np.array([[1.0, -2.0]]))

    def test_domain_error_names_row(self):
        X = np.ones((5, 4))
        X[3, 2] = -1.0
        with pytest.raises(DomainError, match=r"\[1.0, 1.0, -1.0, 1.0\]"):
            diamond().eval_batch(X)

    def test_positive_p_allows_zero(self):
        assert lp_combiner([1, 1], 2).eval([0, 3]) == 3.0

    def test_negative_p_excludes_zero(self):
        c = lp_combiner([1, 1], -2)
        assert c.lower_open
        with pytest.raises(DomainError):
            c.eval([0.0, 1.0])

    def test_p_zero_unsupported(self):
        with pytest.raises(UnsupportedExponentError):
            lp_combiner([1, 1], 0)

    @pytest.mark.parametrize("w", [[1, 1, 1], [1, 0, 1, 1], [1, -1, 1, 1], [1, np.inf, 1, 1]])
    def test_bad_diamond_weights(self, w):
        with pytest.raises(WeightError):
            diamond(w)

    def test_wrong_arity(self):
        with pytest.raises(DomainError, match="expected 4"):
            diamond().eval([1, 1])


class TestGradient:
    def test_diamond_unit(self):
        np.testing.assert_allclose(diamond().gradient(np.ones(4)), [0.25] * 4, rtol=0, atol=1e-15)

    def test_diamond_t1(self):
        g = diamond([2, 2 / 3, 1, 1]).gradient(np.ones(4))
        np.testing.assert_allclose(g, [1 / 8, 3 / 8, 1 / 4, 1 / 4], rtol=1e-14)
        assert math.fsum(g) == pytest.approx(1.0, abs=1e-14)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=2))
    def test_mean_gradient_constant(self, x):
        np.testing.assert_array_equal(mean_combiner(2).gradient(x), [0.5, 0.5])

    @given(w=vec4, c=positive)
    def test_diamond_gradient_free_of_level(self, w, c):
        d = diamond(w)
        np.testing.assert_allclose(d.gradient(np.full(4, c)), d.gradient(np.ones(4)), rtol=1e-12)

    @given(w=moderate4, x=moderate4)
    def test_diamond_analytic_matches_fd(self, w, x):
        d = diamond(w)
        g = d.gradient(np.array(x))
        fd = finite_difference_gradient(d, np.array(x))
        np.testing.assert_allclose(fd, g, rtol=1e-6, atol=1e-9 * np.abs(g).max())

    @given(p=exponents, w=st.lists(st.floats(0.1, 10), min_size=3, max_size=3),
           x=st.lists(st.floats(0.1, 10), min_size=3, max_size=3))
    def test_lp_analytic_matches_fd(self, p, w, x):
        c = lp_combiner(w, p)
        g = c.gradient(np.array(x))
        fd = finite_difference_gradient(c, np.array(x))
        np.testing.assert_allclose(fd, g, rtol=1e-6, atol=1e-9 * np.abs(g).max())

    @pytest.mark.parametrize(
        "c",
        [diamond(), diamond([2, 2 / 3, 1, 1]), mean_combiner(3), lp_combiner([0.5, 0.5], 1),
         lp_combiner([2.0, 2.0], -1), identity()],
        ids=lambda c: c.label,
    )
    @pytest.mark.parametrize("level", [0.3, 1.0, 7.5])
    def test_gradient_sums_to_one_on_diagonal(self, c, level):
        assert c.averaging
        assert math.fsum(c.gradient(np.full(c.arity, level))) == pytest.approx(1.0, abs=1e-10)

    def test_fd_fallback_used_without_analytic(self):
        c = from_function(lambda x: x[0] * x[1], 2)
        np.testing.assert_allclose(c.gradient([2.0, 3.0]), [3.0, 2.0], rtol=1e-9)

    def test_boundary_point_rejected(self):
        c = from_function(lambda x: x[0] + x[1], 2, domain=(0.0, 1.0))
        with pytest.raises(BoundaryError):
            c.gradient([0.0, 0.5])

    def test_stencil_leaving_domain(self):
        c = from_function(lambda x: x[0] + x[1], 2, domain=(0.0, 1.0))
        with pytest.raises(BoundaryError, match="stencil"):
            c.gradient([1e-9, 0.5])


class TestHomogeneity:
    @given(w=vec4, x=vec4, t=scale_t)
    def test_diamond(self, w, x, t):
        d = diamond(w)
        x = np.array(x)
        assert d.eval(t * x) == pytest.approx(t * d.eval(x), rel=1e-12)

    @given(p=exponents, x=st.lists(positive, min_size=3, max_size=3), t=scale_t)
    def test_lp(self, p, x, t):
        c = lp_combiner([0.7, 1.1, 2.0], p)
        x = np.array(x)
        assert c.eval(t * x) == pytest.approx(t * c.eval(x), rel=1e-12)


class TestCompose:
    def test_folded_weights_equal_diamond(self):
        rng = np.random.default_rng(3)
        w = np.array([2.0, 2 / 3, 1.0, 1.0])
        X = np.exp(rng.normal(size=(10_000, 4)))
        np.testing.assert_allclose(
            folded_diamond(w).eval_batch(X), diamond(w).eval_batch(X), rtol=1e-12, atol=0
        )

    def test_composed_gradient_matches_diamond(self):
        w = np.array([1.5, 0.5, 1.0, 3.0])
        x = np.array([0.7, 1.9, 1.1, 0.4])
        np.testing.assert_allclose(folded_diamond(w).gradient(x), diamond(w).gradient(x), rtol=1e-12)

    def test_auto_scale_normalizes(self):
        spec = CompositionSpec(
            outer=lp_combiner([1, 1], 2),
            inner=[lp_combiner([1, 1], -2), lp_combiner([1, 1], -2)],
            index_sets=[[0, 1], [2, 3]],
            scale="auto",
        )
        c = compose(spec)
        assert c.at_ones() == pytest.approx(1.0, abs=1e-12)
        assert c.normalized().at_ones() == pytest.approx(1.0, abs=1e-12)

    def test_auto_equals_unscaled_over_value_at_one(self):
        outer = lp_combiner([1, 2], 3)
        inner = [lp_combiner([1, 1], -2), mean_combiner(2)]
        plain = compose(CompositionSpec(outer, inner, [[0, 1], [2, 3]]))
        auto = compose(CompositionSpec(outer, inner, [[0, 1], [2, 3]], scale="auto"))
        X = 0.2 + np.random.default_rng(4).random((500, 4))
        np.testing.assert_allclose(auto.eval_batch(X), plain.eval_batch(X) / plain.at_ones(), rtol=1e-13)

    def test_identity_inner_keeps_mean(self):
        c = compose(CompositionSpec(mean_combiner(2), [identity(), identity()], [[0], [1]]))
        X = np.random.default_rng(5).normal(size=(100, 2))
        np.testing.assert_array_equal(c.eval_batch(X), mean_combiner(2).eval_batch(X))

    def test_explicit_scale_must_normalize(self):
        with pytest.raises(NormalizationError):
            compose(CompositionSpec(lp_combiner([1, 1], 1), [identity(), identity()], [[0], [1]],
                                    scale=[1.0, 1.0]))

    def test_explicit_scale_accepted(self):
        c = compose(CompositionSpec(lp_combiner([1, 1], 1), [identity(), identity()], [[0], [1]],
                                    scale=[0.25, 0.75]))
        assert c.eval([2.0, 2.0]) == pytest.approx(2.0)

    def test_nonpositive_scale(self):
        with pytest.raises(NormalizationError):
            CompositionSpec(lp_combiner([1, 1], 1), [identity(), identity()], [[0], [1]],
                            scale=[1.5, -0.5])

    def test_cover_violation(self):
        with pytest.raises(SpecError, match="cover"):
            CompositionSpec(mean_combiner(2), [identity(), identity()], [[0], [2]])

    def test_empty_index_set(self):
        with pytest.raises(SpecError, match="empty"):
            CompositionSpec(mean_combiner(2), [identity(), identity()], [[0], []])

    def test_arity_mismatch(self):
        with pytest.raises(SpecError, match="arity"):
            CompositionSpec(mean_combiner(2), [identity(), identity()], [[0, 1], [2]])

    def test_overlapping_sets_allowed(self):
        c = compose(CompositionSpec(mean_combiner(2), [mean_combiner(2), identity()], [[0, 1], [1]]))
        assert c.arity == 2
        assert c.eval([1.0, 3.0]) == pytest.approx(2.5)
