import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carbonsched.curves import (
    MarginalCapacityCurve,
    PowerModel,
    ThroughputProfile,
    curve_from_profile,
    extrapolate_curve,
    monotonize,
    perturb_curve,
    synthetic_curve,
    validated_curve,
)
from carbonsched.errors import CurveError


class TestFromProfile:
    def test_perfect_scaling(self):
        profile = ThroughputProfile(samples={1: 100.0, 2: 200.0}, m=1, M=2)
        curve = curve_from_profile(profile)
        assert curve.values == (1.0, 1.0)

    def test_diminishing(self):
        profile = ThroughputProfile(samples={1: 100.0, 2: 170.0}, m=1, M=2)
        assert curve_from_profile(profile).values == (1.0, 0.7)

    def test_interpolated_stride(self):
        # Th_2 sits on the line between 100 and 280: 190 by hand, so both
        # marginals are (190-100)/100 = (280-190)/100 = 0.9.
        profile = ThroughputProfile(samples={1: 100.0, 3: 280.0}, m=1, M=3, beta=2)
        curve = curve_from_profile(profile)
        assert curve.values == pytest.approx((1.0, 0.9, 0.9))

    def test_non_monotone_rejected_with_indices(self):
        profile = ThroughputProfile(samples={1: 100.0, 2: 110.0, 3: 190.0}, m=1, M=3)
        with pytest.raises(CurveError) as err:
            curve_from_profile(profile)
        assert err.value.indices == (2,)

    def test_profile_requires_endpoints(self):
        with pytest.raises(CurveError, match="must include"):
            ThroughputProfile(samples={1: 100.0}, m=1, M=2)

    def test_profile_rejects_decreasing_throughput(self):
        with pytest.raises(CurveError, match="non-decreasing"):
            ThroughputProfile(samples={1: 100.0, 2: 90.0}, m=1, M=2)

    @given(st.data())
    @settings(max_examples=100, deadline=None)
    def test_concave_throughput_yields_monotone_curve(self, data):
        m = 1
        M = data.draw(st.integers(min_value=1, max_value=8))
        first = data.draw(st.floats(min_value=10.0, max_value=100.0))
        # concave from zero: non-increasing increments no larger than the first
        increments = [first]
        for _ in range(M - 1):
            increments.append(
                data.draw(st.floats(min_value=0.0, max_value=increments[-1]))
            )
        th, total = {}, 0.0
        for j, inc in enumerate(increments, start=m):
            total += inc
            th[j] = total
        curve = curve_from_profile(ThroughputProfile(samples=th, m=m, M=M))
        assert curve.is_monotone
        assert curve.values[0] == 1.0


class TestSynthetic:
    def test_linear(self):
        assert synthetic_curve("linear", 1, 4).values == (1.0, 1.0, 1.0, 1.0)

    def test_diminishing_demo(self):
        assert synthetic_curve("diminishing", 1, 2, decay=0.7).values == (1.0, 0.7)

    def test_decay_one_equals_linear(self):
        assert synthetic_curve("diminishing", 1, 4, decay=1.0).values == \
            synthetic_curve("linear", 1, 4).values

    def test_invalid_bounds(self):
        with pytest.raises(CurveError):
            synthetic_curve("linear", 2, 1)
        with pytest.raises(CurveError):
            synthetic_curve("diminishing", 1, 3, decay=0.0)


class TestPerturb:
    def test_zero_is_identity(self):
        curve = synthetic_curve("diminishing", 1, 4, decay=0.8)
        assert perturb_curve(curve, 0.0, seed=3) == curve

    def test_fixed_seed_deterministic(self):
        curve = synthetic_curve("diminishing", 1, 4, decay=0.8)
        assert perturb_curve(curve, 20.0, seed=9) == perturb_curve(curve, 20.0, seed=9)

    def test_renormalized_baseline(self):
        curve = synthetic_curve("linear", 1, 5)
        perturbed = perturb_curve(curve, 40.0, seed=11)
        assert perturbed.values[0] == 1.0

    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_flat_curve_band_after_renormalization(self, seed):
        curve = synthetic_curve("linear", 1, 3)
        x = 0.25
        perturbed = perturb_curve(curve, 100 * x, seed=seed)
        lo, hi = (1 - x) / (1 + x), (1 + x) / (1 - x)
        for v in perturbed.values:
            assert lo - 1e-9 <= v <= hi + 1e-9

    def test_violation_flagged_not_raised(self):
        curve = synthetic_curve("diminishing", 1, 6, decay=0.99)
        for seed in range(50):
            perturbed = perturb_curve(curve, 50.0, seed=seed)
            if not perturbed.is_monotone:
                assert perturbed.violations()
                return
        pytest.fail("expected at least one non-monotone perturbation in 50 seeds")


class TestCurveType:
    def test_baseline_must_be_one(self):
        with pytest.raises(CurveError, match="normalized"):
            MarginalCapacityCurve(m=1, M=2, values=(0.9, 0.5))

    def test_positive_values_required(self):
        with pytest.raises(CurveError):
            MarginalCapacityCurve(m=1, M=2, values=(1.0, 0.0))

    def test_validated_rejects_increase(self):
        with pytest.raises(CurveError) as err:
            validated_curve(1, 3, (1.0, 0.5, 0.8))
        assert err.value.indices == (2,)

    def test_work_at(self):
        curve = synthetic_curve("diminishing", 1, 3, decay=0.5)
        assert curve.work_at(0) == 0.0
        assert curve.work_at(1) == 1.0
        assert curve.work_at(3) == pytest.approx(1.75)

    def test_monotonize_projection(self):
        bumpy = MarginalCapacityCurve(m=1, M=4, values=(1.0, 0.5, 0.8, 0.6))
        fixed = monotonize(bumpy)
        assert fixed.is_monotone
        assert fixed.values == (1.0, 0.5, 0.5, 0.5)

    def test_power_model_positive(self):
        assert PowerModel(60.0).per_server_power == 60.0
        with pytest.raises(CurveError):
            PowerModel(0.0)


class TestExtrapolate:
    def test_geometric_continuation(self):
        curve = synthetic_curve("diminishing", 1, 2, decay=0.7)
        extended = extrapolate_curve(curve, 4)
        assert extended.values == pytest.approx((1.0, 0.7, 0.49, 0.343))

    def test_flat_extends_flat(self):
        curve = synthetic_curve("linear", 1, 2)
        assert extrapolate_curve(curve, 3).values == (1.0, 1.0, 1.0)

    def test_same_m_is_identity(self):
        curve = synthetic_curve("diminishing", 1, 3, decay=0.9)
        assert extrapolate_curve(curve, 3) is curve

    def test_single_point_extends_flat(self):
        curve = synthetic_curve("linear", 2, 2)
        assert extrapolate_curve(curve, 4).values == (1.0, 1.0, 1.0)
