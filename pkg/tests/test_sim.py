import numpy as np
import pytest

from carbonsched.curves import synthetic_curve
from carbonsched.policies import Policy, plan
from carbonsched.schedule import JobSpec, compute_cost, planned_carbon
from carbonsched.sim import (
    SimConfig,
    simulate,
    sweep_parameter,
    sweep_start_times,
)
from carbonsched.trace import synthetic_diurnal_trace
from conftest import trace_of
from support import random_instance

ALL_POLICIES = [
    Policy.parse("greedy"),
    Policy.parse("agnostic"),
    Policy.parse("sr_deadline"),
    Policy.parse("static:2"),
]


def _plan_metrics(policy, job, curve, trace, mode):
    schedule = plan(policy, job, curve, trace)
    metrics = planned_carbon(schedule, trace, power=job.power, mode=mode)
    return schedule, metrics


class TestPlanIdentity:
    @pytest.mark.parametrize("mode", ["prorated", "whole_slot"])
    @pytest.mark.parametrize("policy_text", ["greedy", "agnostic", "sr_deadline", "static:2"])
    def test_demo(self, demo_job, demo_trace, diminishing_curve, policy_text, mode):
        policy = Policy.parse(policy_text)
        config = SimConfig(accounting_mode=mode)
        result = simulate(demo_job, diminishing_curve, demo_trace, policy, config)
        _, metrics = _plan_metrics(policy, demo_job, diminishing_curve, demo_trace, mode)
        assert result.carbon_g == metrics.carbon_g
        assert result.compute_slot_hours == metrics.compute_slot_hours
        assert result.completion_slot == metrics.completion_slot
        assert result.met_deadline

    @pytest.mark.parametrize("mode", ["prorated", "whole_slot"])
    def test_random_instances(self, mode):
        rng = np.random.default_rng(31)
        for _ in range(60):
            job, curve, trace = random_instance(rng)
            for policy in ALL_POLICIES:
                if policy.kind == "static" and policy.scale > job.max_servers:
                    continue
                config = SimConfig(accounting_mode=mode, rng_seed=1)
                result = simulate(job, curve, trace, policy, config)
                _, metrics = _plan_metrics(policy, job, curve, trace, mode)
                assert result.carbon_g == metrics.carbon_g, (policy.label, job)
                assert result.compute_slot_hours == metrics.compute_slot_hours
                assert result.completion_slot == metrics.completion_slot
                assert result.met_deadline

    def test_threshold_policy_identity(self):
        trace = trace_of([10.0, 100.0, 20.0, 15.0, 60.0])
        job = JobSpec("j", 0, 2.0, 1, 1, 4)
        policy = Policy.parse("sr_threshold:50")
        result = simulate(job, synthetic_curve("linear", 1, 1), trace, policy)
        schedule = plan(policy, job, synthetic_curve("linear", 1, 1), trace)
        metrics = planned_carbon(schedule, trace)
        assert result.carbon_g == metrics.carbon_g
        assert result.completion_slot == metrics.completion_slot


class TestDeterminism:
    def test_same_seed_same_result(self):
        trace = synthetic_diurnal_trace(72, noise_pct=10, seed=4)
        job = JobSpec("j", 0, 24.0, 1, 4, 48)
        curve = synthetic_curve("diminishing", 1, 4, decay=0.9)
        config = SimConfig(
            forecast_error_pct=30, profile_error_pct=20, denial_probability=0.3,
            rng_seed=99,
        )
        a = simulate(job, curve, trace, Policy.parse("greedy"), config)
        b = simulate(job, curve, trace, Policy.parse("greedy"), config)
        assert a == b

    def test_different_seed_differs(self):
        trace = synthetic_diurnal_trace(72, noise_pct=10, seed=4)
        job = JobSpec("j", 0, 24.0, 1, 4, 48)
        curve = synthetic_curve("diminishing", 1, 4, decay=0.9)
        results = {
            simulate(
                job, curve, trace, Policy.parse("greedy"),
                SimConfig(forecast_error_pct=30, rng_seed=seed),
            ).carbon_g
            for seed in range(8)
        }
        assert len(results) > 1


class TestDenial:
    def test_full_denial_with_no_elasticity_is_noop(self):
        trace = trace_of([10.0, 100.0, 20.0])
        job = JobSpec("j", 0, 2.0, 1, 1, 3)
        curve = synthetic_curve("linear", 1, 1)
        denied = simulate(job, curve, trace, Policy.parse("greedy"),
                          SimConfig(denial_probability=1.0, rng_seed=5))
        free = simulate(job, curve, trace, Policy.parse("greedy"),
                        SimConfig(denial_probability=0.0, rng_seed=5))
        assert denied.carbon_g == free.carbon_g
        assert denied.completion_slot == free.completion_slot
        assert [r.granted_servers for r in denied.timeline] == \
            [r.granted_servers for r in free.timeline]

    def test_grants_never_exceed_requests(self):
        trace = synthetic_diurnal_trace(72, noise_pct=5, seed=2)
        job = JobSpec("j", 0, 24.0, 1, 6, 48)
        curve = synthetic_curve("diminishing", 1, 6, decay=0.95)
        result = simulate(job, curve, trace, Policy.parse("greedy"),
                          SimConfig(denial_probability=0.5, rng_seed=3))
        for record in result.timeline:
            assert record.granted_servers <= record.requested_servers

    def test_denial_overhead_direction(self):
        trace = synthetic_diurnal_trace(96, noise_pct=5, seed=8)
        job = JobSpec("j", 0, 24.0, 1, 6, 48)
        curve = synthetic_curve("linear", 1, 6)
        def mean_carbon(p):
            return float(np.mean([
                simulate(job, curve, trace, Policy.parse("greedy"),
                         SimConfig(denial_probability=p, rng_seed=s)).carbon_g
                for s in range(40)
            ]))
        assert mean_carbon(0.0) <= mean_carbon(0.5) + 1e-9


class TestConservation:
    def test_work_bounded_by_granted_capacity(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            job, curve, trace = random_instance(rng, n_range=(3, 8))
            config = SimConfig(
                forecast_error_pct=20, profile_error_pct=20,
                denial_probability=0.2, rng_seed=int(rng.integers(1000)),
            )
            result = simulate(job, curve, trace, Policy.parse("greedy"), config)
            for record in result.timeline:
                cap = curve.work_at(record.granted_servers)
                assert record.work_done <= cap + 1e-9
            total = sum(r.work_done for r in result.timeline)
            assert total == pytest.approx(result.work_done, abs=1e-9)

    def test_met_deadline_accounts_work(self):
        rng = np.random.default_rng(78)
        for _ in range(25):
            job, curve, trace = random_instance(rng)
            result = simulate(job, curve, trace, Policy.parse("greedy"), SimConfig())
            if result.met_deadline:
                assert result.work_done >= job.base_length_slots - 1e-9
                assert result.completion_slot <= job.completion_slot + 1e-9


class TestRecompute:
    def test_profile_error_still_completes(self):
        trace = synthetic_diurnal_trace(72, noise_pct=5, seed=6)
        job = JobSpec("j", 0, 24.0, 1, 4, 48)
        curve = synthetic_curve("diminishing", 1, 4, decay=0.8)
        for seed in range(10):
            config = SimConfig(profile_error_pct=30, rng_seed=seed)
            result = simulate(job, curve, trace, Policy.parse("greedy"), config)
            assert result.met_deadline, seed

    def test_recompute_flag_recorded(self):
        trace = synthetic_diurnal_trace(72, noise_pct=5, seed=6)
        job = JobSpec("j", 0, 24.0, 1, 4, 48)
        curve = synthetic_curve("diminishing", 1, 4, decay=0.8)
        config = SimConfig(forecast_error_pct=40, recompute_threshold=0.01, rng_seed=1)
        result = simulate(job, curve, trace, Policy.parse("greedy"), config)
        assert result.recomputes > 0
        assert any(r.recomputed for r in result.timeline)

    def test_threshold_none_disables(self):
        trace = synthetic_diurnal_trace(72, noise_pct=5, seed=6)
        job = JobSpec("j", 0, 24.0, 1, 4, 48)
        curve = synthetic_curve("diminishing", 1, 4, decay=0.8)
        config = SimConfig(forecast_error_pct=40, recompute_threshold=None, rng_seed=1)
        result = simulate(job, curve, trace, Policy.parse("greedy"), config)
        assert result.recomputes == 0

    def test_scaling_overhead_slows_progress(self):
        trace = synthetic_diurnal_trace(72, noise_pct=0)
        job = JobSpec("j", 0, 24.0, 1, 4, 48)
        curve = synthetic_curve("diminishing", 1, 4, decay=0.9)
        fast = simulate(job, curve, trace, Policy.parse("greedy"), SimConfig())
        slow = simulate(job, curve, trace, Policy.parse("greedy"),
                        SimConfig(scaling_overhead_s=1800.0, recompute_threshold=None))
        assert slow.work_done <= fast.work_done + 1e-9
        assert slow.completion_slot >= fast.completion_slot - 1e-9


class TestBestEffort:
    def test_window_too_small_reports_progress(self):
        # 2 slots at up to 2 servers cannot carry 6 units of work
        trace = trace_of([10.0, 20.0])
        job = JobSpec("j", 0, 2.0, 1, 2, 2)
        curve = synthetic_curve("linear", 1, 2)
        config = SimConfig(denial_probability=1.0, rng_seed=0)
        result = simulate(job, curve, trace, Policy.parse("greedy"), config)
        # every scale-up denied: the job holds one server throughout
        assert result.work_done == pytest.approx(2.0)
        assert result.met_deadline


class TestSweeps:
    def test_constant_trace_no_savings(self):
        trace = trace_of([100.0] * 12)
        job = JobSpec("j", 0, 4.0, 1, 2, 8)
        curve = synthetic_curve("linear", 1, 2)
        table = sweep_start_times(job, curve, trace, [Policy.parse("greedy")], stride=4)
        for cell in table.summary()["cells"]:
            if cell["policy"] == "greedy":
                assert cell["mean_savings_vs_agnostic_pct"] == pytest.approx(0.0, abs=1e-9)

    def test_stride_covering_trace_single_start(self):
        trace = trace_of([100.0] * 12)
        job = JobSpec("j", 0, 4.0, 1, 2, 8)
        curve = synthetic_curve("linear", 1, 2)
        table = sweep_start_times(job, curve, trace, [Policy.parse("greedy")], stride=len(trace))
        assert len({r.axis_value for r in table.rows}) == 1

    def test_start_row_count_and_omissions(self):
        trace = trace_of([100.0] * 10)
        job = JobSpec("j", 0, 2.0, 1, 2, 4)  # 4-slot window
        curve = synthetic_curve("linear", 1, 2)
        table = sweep_start_times(job, curve, trace, [], stride=2)
        starts = sorted({r.axis_value for r in table.rows})
        assert starts == [0.0, 2.0, 4.0, 6.0]
        assert table.omitted == 1  # offset 8 would overrun

    def test_completion_time_monotone_for_greedy(self):
        trace = synthetic_diurnal_trace(96, noise_pct=0)
        job = JobSpec("j", 0, 12.0, 1, 4, 48)
        curve = synthetic_curve("diminishing", 1, 4, decay=0.9)
        values = [12, 18, 24, 36, 48]
        table = sweep_parameter(job, curve, trace, "completion_time", values,
                                [Policy.parse("greedy")])
        carbons = [
            cell["mean_carbon_g"] for cell in table.summary()["cells"]
            if cell["policy"] == "greedy"
        ]
        assert carbons == sorted(carbons, reverse=True)

    def test_no_slack_sr_equals_agnostic(self):
        trace = synthetic_diurnal_trace(48, noise_pct=0)
        job = JobSpec("j", 0, 12.0, 1, 4, 24)
        curve = synthetic_curve("linear", 1, 4)
        table = sweep_parameter(job, curve, trace, "completion_time", [12],
                                [Policy.parse("sr_deadline")])
        cells = {c["policy"]: c for c in table.summary()["cells"]}
        assert cells["sr_deadline"]["mean_carbon_g"] == \
            pytest.approx(cells["agnostic"]["mean_carbon_g"], rel=1e-12)

    def test_cluster_size_sr_savings_constant(self):
        trace = synthetic_diurnal_trace(48, noise_pct=0)
        job = JobSpec("j", 0, 12.0, 1, 4, 24)
        curve = synthetic_curve("diminishing", 1, 4, decay=0.8)
        table = sweep_parameter(job, curve, trace, "cluster_size", [1, 2, 4],
                                [Policy.parse("sr_deadline")])
        savings = [
            cell["mean_savings_vs_agnostic_pct"] for cell in table.summary()["cells"]
            if cell["policy"] == "sr_deadline"
        ]
        assert max(savings) - min(savings) < 1e-9

    def test_csv_format(self):
        trace = trace_of([100.0] * 8)
        job = JobSpec("j", 0, 2.0, 1, 2, 4)
        curve = synthetic_curve("linear", 1, 2)
        table = sweep_parameter(job, curve, trace, "denial", [0.0, 0.5],
                                [Policy.parse("greedy")], runs=2)
        lines = table.to_csv().strip().split("\n")
        assert lines[0] == "axis_value,policy,seed,carbon_g,compute_slot_hours,completion_slot,met_deadline"
        assert len(lines) == 1 + 2 * 2 * 2  # values x policies(greedy+agnostic) x runs

    def test_savings_cov_correlation(self):
        # family of traces sharing a mean, amplitude rising: more variation,
        # more savings to harvest
        import statistics
        from carbonsched.trace import region_stats

        job = JobSpec("j", 0, 24.0, 1, 4, 36)
        curve = synthetic_curve("linear", 1, 4)
        covs, savings = [], []
        for k in range(12):
            trace = synthetic_diurnal_trace(48, mean=300, amplitude=10 + 20 * k)
            covs.append(region_stats(trace).coefficient_of_variation)
            greedy = simulate(job, curve, trace, Policy.parse("greedy"))
            agnostic = simulate(job, curve, trace, Policy.parse("agnostic"))
            savings.append(1 - greedy.carbon_g / agnostic.carbon_g)
        assert statistics.correlation(covs, savings) > 0.5
