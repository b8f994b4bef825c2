import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hierlat.combiner import diamond, mean_combiner
from hierlat.dist import DiscreteDist
from hierlat.errors import ConvergenceError, DegenerateError, RangeError, WeightError
from hierlat.rates import (
    diamond_alpha,
    diamond_rates,
    estimate_limit_mean,
    lambda_from_alpha,
    phi_from_alpha,
    phi_sequence,
    rate_report,
    side_weighted_family,
    t_family,
)

PHI_T1 = 11 * math.sqrt(2) / 27

nonzero_vec = st.integers(2, 8).flatmap(
    lambda k: st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=k, max_size=k)
).filter(lambda v: any(abs(x) > 1e-300 for x in v))


class TestPhi:
    def test_equal_components(self):
        assert phi_from_alpha([0.25] * 4) == 0.5

    def test_basis_vector(self):
        assert phi_from_alpha([1, 0, 0, 0]) == 1.0

    def test_t1_gradient(self):
        assert phi_from_alpha([1 / 8, 3 / 8, 1 / 4, 1 / 4]) == pytest.approx(PHI_T1, abs=1e-15)

    def test_half_half(self):
        assert phi_from_alpha([0.5, 0.5, 0, 0]) == pytest.approx(1 / math.sqrt(2), abs=1e-15)

    def test_t1_exact_ingredients(self):
        a = np.array([1 / 8, 3 / 8, 1 / 4, 1 / 4])
        assert math.fsum(a**3) == pytest.approx(11 / 128, abs=1e-16)
        assert lambda_from_alpha(a) ** 3 == pytest.approx(27 / (128 * math.sqrt(2)), rel=1e-15)

    def test_zero_vector(self):
        with pytest.raises(DegenerateError):
            phi_from_alpha([0, 0, 0])

    def test_empty(self):
        with pytest.raises(DegenerateError):
            phi_from_alpha([])

    @given(nonzero_vec)
    def test_bounds(self, a):
        k = len(a)
        phi = phi_from_alpha(a)
        assert 1 / math.sqrt(k) - 1e-12 <= phi <= 1 + 1e-12

    @given(nonzero_vec, st.floats(-1e3, 1e3).filter(lambda t: abs(t) > 1e-3))
    def test_scale_invariance(self, a, t):
        assert phi_from_alpha(np.array(a) * t) == pytest.approx(phi_from_alpha(a), rel=1e-12)

    def test_tiny_and_huge_entries(self):
        assert phi_from_alpha([1e-200, 1e-200]) == pytest.approx(1 / math.sqrt(2), rel=1e-14)
        assert phi_from_alpha([1e200, 1e200, 1e200]) == pytest.approx(1 / math.sqrt(3), rel=1e-14)

    def test_sign_ignored(self):
        assert phi_from_alpha([-0.3, 0.7]) == phi_from_alpha([0.3, 0.7])


class TestReport:
    def test_flags(self):
        r = rate_report([0.5, 0.5])
        assert r.convex and r.bounds_ok and r.lambda_le_phi
        assert r.lower_bound == pytest.approx(1 / math.sqrt(2))

    def test_non_convex_has_no_lambda_check(self):
        assert rate_report([1.0, -0.5]).lambda_le_phi is None

    def test_basis_flag(self):
        assert rate_report([0, 3, 0]).is_basis_multiple
        assert not rate_report([1, 3, 0]).is_basis_multiple

    def test_as_dict_full_precision(self):
        d = diamond_rates([2, 2 / 3, 1, 1]).as_dict()
        assert float(d["phi"]) == diamond_rates([2, 2 / 3, 1, 1]).phi


class TestDiamond:
    def test_unit_weights(self):
        r = diamond_rates([1, 1, 1, 1])
        assert r.lam == 0.5
        assert r.phi == 0.5

    def test_t1(self):
        r = diamond_rates([2, 2 / 3, 1, 1])
        assert r.phi == pytest.approx(PHI_T1, abs=1e-12)
        np.testing.assert_allclose(r.alpha, [1 / 8, 3 / 8, 1 / 4, 1 / 4], rtol=1e-14)

    def test_side_limit(self):
        phi = diamond_rates(side_weighted_family(1.999)).phi
        assert abs(phi - 1 / math.sqrt(2)) <= 1e-3

    @given(st.lists(st.floats(1e-3, 1e3), min_size=4, max_size=4))
    def test_closed_form_matches_generic(self, w):
        r = diamond_rates(w)
        assert r.phi == pytest.approx(phi_from_alpha(diamond_alpha(w)), abs=1e-12)
        assert r.lam == pytest.approx(lambda_from_alpha(diamond_alpha(w)), rel=1e-12)

    @given(st.lists(st.floats(1e-2, 1e2), min_size=4, max_size=4))
    def test_alpha_matches_gradient(self, w):
        np.testing.assert_allclose(diamond_alpha(w), diamond(w).gradient(np.ones(4)), rtol=1e-12)

    @given(st.floats(1.0, 1.999))
    def test_side_alpha_sums_to_one(self, w):
        assert math.fsum(diamond_alpha(side_weighted_family(w))) == pytest.approx(1.0, abs=1e-12)

    def test_weight_errors(self):
        with pytest.raises(WeightError):
            diamond_rates([1, 1, 0, 1])
        with pytest.raises(WeightError):
            diamond_rates([1, 1, 1])


class TestFamilies:
    def test_side_at_one(self):
        np.testing.assert_array_equal(side_weighted_family(1.0), [1, 1, 1, 1])

    def test_side_at_one_and_half(self):
        np.testing.assert_array_equal(side_weighted_family(1.5), [1.5, 1.5, 0.5, 0.5])
        np.testing.assert_allclose(diamond_alpha(side_weighted_family(1.5)),
                                   [0.375, 0.375, 0.125, 0.125], rtol=1e-15)

    @pytest.mark.parametrize("w", [2.0, 0.99, -1.0, 3.0])
    def test_side_out_of_range(self, w):
        with pytest.raises(RangeError):
            side_weighted_family(w)

    def test_side_phi_increasing(self):
        phis = [diamond_rates(side_weighted_family(w)).phi for w in np.linspace(1, 1.999, 50)]
        assert np.all(np.diff(phis) > 0)

    def test_t1_weights(self):
        np.testing.assert_allclose(t_family(1.0), [2, 2 / 3, 1, 1], rtol=1e-15)

    @given(st.floats(1e-2, 1e2))
    def test_t_family_normalized(self, t):
        assert diamond(t_family(t)).at_ones() == pytest.approx(1.0, abs=1e-12)

    def test_t10_near_basis(self):
        assert diamond_rates(t_family(10.0)).phi > 0.9

    def test_t_phi_increasing(self):
        phis = [diamond_rates(t_family(t)).phi for t in (1, 2, 5, 10, 100)]
        assert np.all(np.diff(phis) > 0) and phis[-1] < 1

    @pytest.mark.parametrize("t", [0.0, -1.0, math.inf, math.nan])
    def test_t_out_of_range(self, t):
        with pytest.raises(RangeError):
            t_family(t)


class TestSequences:
    def test_diamond_sequence_constant(self):
        d = diamond([2, 2 / 3, 1, 1])
        seq = phi_sequence(d, [0.5, 0.9, 1.3, 4.0])
        assert max(seq) - min(seq) <= 1e-12
        assert seq[0] == pytest.approx(PHI_T1, abs=1e-12)

    def test_mean_sequence(self):
        assert phi_sequence(mean_combiner(2), [-3.0, 0.0, 2.0]) == [pytest.approx(1 / math.sqrt(2))] * 3

    def test_empty_path(self):
        assert phi_sequence(diamond(), []) == []

    def test_limit_mean_for_mean_combiner(self):
        c, path = estimate_limit_mean(mean_combiner(2), DiscreteDist.uniform([0, 1]), 1e-3,
                                      pool_size=20_000)
        assert c == pytest.approx(0.5, abs=0.02)
        assert len(path) >= 2

    def test_limit_mean_for_diamond(self):
        c, path = estimate_limit_mean(diamond(), DiscreteDist.uniform([0.5, 1.5]), 2e-3,
                                      pool_size=50_000)
        assert 0.5 < c < 1.5
        # F(x) <= mean(x) for the unit diamond, so the mean drifts down from 1
        assert c < 1.0

    def test_limit_mean_constant_start(self):
        c, _ = estimate_limit_mean(diamond(), DiscreteDist([1.3], [1.0]), 1e-12, pool_size=1000)
        assert c == pytest.approx(1.3, rel=1e-15)

    def test_convergence_error_carries_path(self):
        with pytest.raises(ConvergenceError) as info:
            estimate_limit_mean(diamond(), DiscreteDist.uniform([0.5, 1.5]), 1e-15,
                                max_levels=3, pool_size=1000)
        assert len(info.value.path) == 4
