"""Chronological execution of a policy against ground-truth carbon.

The simulator plans with *believed* inputs (a perturbed forecast and a
perturbed capacity curve), then walks the window slot by slot: requesting
servers, suffering procurement denials, doing work per the *true* curve,
and accruing carbon at the *true* intensity. At the end of each slot the
realized work and carbon are compared with what the current plan
believed; past a relative-deviation threshold the remainder of the job is
replanned with a refreshed forecast and a curve corrected at allocation
levels the run has actually visited.

With zero error, zero denial, and zero overhead, the run realizes the
plan exactly and reports the planned metrics bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .curves import MarginalCapacityCurve, extrapolate_curve, perturb_curve
from .errors import InfeasibleError, JobError
from .policies import Policy, plan
from .schedule import (
    ACCOUNTING_MODES,
    PRORATED,
    WORK_EPS,
    Charge,
    JobSpec,
    Schedule,
    _increment,
    make_schedule,
    metrics_from_charges,
    work_requirement,
)
from .trace import CarbonTrace, perturb_forecast

# Midpoint of the 20-40 s allocation-change overhead observed on real clusters.
SCALING_OVERHEAD_PRESET_S = 30.0

# Refreshed forecasts reach the configured error at this lead time; like
# weather forecasts they are nearly exact for the next slot and degrade
# with horizon distance.
FORECAST_LEAD_SLOTS = 24

SWEEP_AXES = (
    "completion_time",
    "job_length",
    "cluster_size",
    "scale_factor",
    "denial",
    "forecast_error",
    "profile_error",
)


@dataclass(frozen=True)
class SimConfig:
    forecast_error_pct: float = 0.0
    profile_error_pct: float = 0.0
    denial_probability: float = 0.0
    recompute_threshold: Optional[float] = 0.05  # None disables recomputation
    accounting_mode: str = PRORATED
    scaling_overhead_s: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.forecast_error_pct < 0 or self.profile_error_pct < 0:
            raise ValueError("error percentages must be >= 0")
        if not 0.0 <= self.denial_probability <= 1.0:
            raise ValueError(f"denial probability must be in [0, 1], got {self.denial_probability}")
        if self.recompute_threshold is not None and self.recompute_threshold < 0:
            raise ValueError("recompute threshold must be >= 0 or None")
        if self.accounting_mode not in ACCOUNTING_MODES:
            raise ValueError(f"unknown accounting mode {self.accounting_mode!r}")
        if self.scaling_overhead_s < 0:
            raise ValueError("scaling overhead must be >= 0")


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    requested_servers: int
    granted_servers: int
    intensity_actual: float
    intensity_forecast: float
    work_done: float
    recomputed: bool = False


@dataclass(frozen=True)
class SimResult:
    carbon_g: float
    compute_slot_hours: float
    completion_slot: float
    met_deadline: bool
    work_done: float
    policy: str
    timeline: tuple[SlotRecord, ...] = field(repr=False)
    recomputes: int = 0


def _best_effort(job: JobSpec, curve, trace, policy: Policy, start: int, residual: float) -> Schedule:
    """Fallback plan when the residual no longer fits: maximize progress."""
    if policy.deadline_aware:
        n = max(0, job.completion_slot - start)
        alloc = [curve.M] * n
    else:
        alloc = [curve.m] * max(0, len(trace) - start)
    return make_schedule(alloc, start, curve, residual, trace, policy.label)


def _plan_or_best_effort(policy, job, curve, trace, start, work_done, total):
    try:
        return plan(policy, job, curve, trace, start_slot=start, work_done=work_done)
    except InfeasibleError:
        return _best_effort(job, curve, trace, policy, start, max(0.0, total - work_done))


def _refresh_forecast(
    true_trace: CarbonTrace, error_pct: float, seed, anchor_slot: int
) -> CarbonTrace:
    """A freshly drawn forecast as of ``anchor_slot``.

    Per-slot error grows linearly with lead time up to the configured
    magnitude at :data:`FORECAST_LEAD_SLOTS`, reflecting that an updated
    forecast is accurate for the next few hours and no better than the
    original far out. Slots at or before the anchor are already realized
    and carry their true values.
    """
    x = error_pct / 100.0
    rng = np.random.default_rng(seed)
    u = rng.uniform(-x, x, size=len(true_trace))
    values = []
    for s, v in enumerate(true_trace.intensities):
        lead = s - anchor_slot
        if lead <= 0:
            values.append(v)
            continue
        scale = min(1.0, lead / FORECAST_LEAD_SLOTS)
        values.append(max(0.0, v * (1.0 + u[s] * scale)))
    return replace(true_trace, intensities=tuple(values))


def _corrected_curve(
    believed: MarginalCapacityCurve, true_curve: MarginalCapacityCurve, visited
) -> MarginalCapacityCurve:
    """Replace believed marginals with observed truth at visited levels."""
    values = list(believed.values)
    for level in visited:
        if level > believed.m:
            values[level - believed.m] = true_curve.values[level - true_curve.m]
    return MarginalCapacityCurve(
        m=believed.m, M=believed.M, values=tuple(values), name=believed.name
    )


def simulate(
    job: JobSpec,
    true_curve: MarginalCapacityCurve,
    true_trace: CarbonTrace,
    policy: Policy,
    config: SimConfig = SimConfig(),
) -> SimResult:
    """Run one job to completion (or window end) under a policy.

    Never raises on infeasibility: a run that cannot finish returns
    ``met_deadline=False`` with its progress recorded, matching the
    best-effort semantics of procurement-denial studies.
    """
    total_work = work_requirement(job, true_curve)
    if true_curve.M != job.max_servers:
        raise JobError(
            f"curve maximum {true_curve.M} does not match job maximum {job.max_servers}"
        )
    t, T = job.arrival_slot, job.completion_slot
    horizon_end = T if policy.deadline_aware else len(true_trace)
    if horizon_end > len(true_trace):
        raise JobError(
            f"trace covers [0, {len(true_trace)}), window [{t}, {horizon_end}) requested"
        )
    eps = WORK_EPS * max(1.0, total_work)
    rng = np.random.default_rng(config.rng_seed)
    forecast_seed = int(rng.integers(0, 2**63))
    curve_seed = int(rng.integers(0, 2**63))
    believed_trace = (
        perturb_forecast(true_trace, config.forecast_error_pct, forecast_seed)
        if config.forecast_error_pct > 0
        else true_trace
    )
    believed_curve = (
        perturb_curve(true_curve, config.profile_error_pct, curve_seed)
        if config.profile_error_pct > 0
        else true_curve
    )
    current = _plan_or_best_effort(policy, job, believed_curve, believed_trace, t, 0.0, total_work)
    charge_plan = {(ch.slot, ch.level): ch for ch in current.charges}
    plan_last_active = max(current.opened_slots(), default=-1)

    dead_fraction = 0.0
    if config.scaling_overhead_s > 0:
        dead_fraction = min(1.0, config.scaling_overhead_s / true_trace.slot_duration.total_seconds())

    residual = total_work
    done = residual <= eps
    prev_grant = 0
    visited_levels: set[int] = set()
    realized: list[Charge] = []
    crossing: Optional[tuple[int, int]] = None
    timeline: list[SlotRecord] = []
    recomputes = 0
    # Cumulative since arrival; the believed side stitches together
    # whichever plan was active when each slot executed.
    believed_work = believed_carbon = 0.0
    realized_work = realized_carbon = 0.0

    for slot in range(t, horizon_end):
        if done:
            break
        requested = current.allocation_at(slot)
        if requested == 0:
            granted = 0
        else:
            granted = min(requested, max(prev_grant, job.min_servers))
            for _ in range(granted + 1, requested + 1):
                if rng.random() >= config.denial_probability:
                    granted += 1
        d = dead_fraction if (granted != prev_grant and granted > 0) else 0.0
        work_slot = 0.0
        if granted > 0:
            visited_levels.add(granted)
            for level in range(true_curve.m, granted + 1):
                planned = charge_plan.get((slot, level))
                frac_plan = planned.fraction if planned else 1.0
                servers, w_true = _increment(true_curve, level)
                frac_used = 0.0
                if not done and frac_plan > 0.0:
                    avail = frac_plan * w_true * (1.0 - d)
                    if residual >= avail - eps:
                        frac_used = frac_plan
                        work_slot += avail
                        residual -= avail
                        if residual <= eps:
                            residual = 0.0
                            done = True
                            crossing = (slot, level)
                    else:
                        frac_used = residual / (w_true * (1.0 - d))
                        work_slot += residual
                        residual = 0.0
                        done = True
                        crossing = (slot, level)
                realized.append(
                    Charge(slot=slot, level=level, servers=servers, work=w_true,
                           fraction=frac_used)
                )
                realized_carbon += true_trace[slot] * servers * frac_used
            realized_work += work_slot
        for level in range(believed_curve.m, requested + 1):
            planned = charge_plan.get((slot, level))
            if planned is None:
                continue
            servers, w_bel = _increment(believed_curve, level)
            believed_work += planned.fraction * w_bel
            believed_carbon += believed_trace[slot] * servers * planned.fraction
        timeline.append(
            SlotRecord(
                slot=slot,
                requested_servers=requested,
                granted_servers=granted,
                intensity_actual=true_trace[slot],
                intensity_forecast=believed_trace[slot],
                work_done=work_slot,
            )
        )
        prev_grant = granted
        if done or config.recompute_threshold is None or slot + 1 >= horizon_end:
            continue
        deviation = max(
            _relative_deviation(realized_work, believed_work),
            _relative_deviation(realized_carbon, believed_carbon),
        )
        # A plan with nothing scheduled ahead while work remains can never
        # finish; replanning exists to ensure completion, so force one even
        # when the drift stayed under the threshold.
        plan_exhausted = slot >= plan_last_active
        if deviation > config.recompute_threshold or plan_exhausted:
            refresh_seed = int(rng.integers(0, 2**63))
            believed_trace = (
                _refresh_forecast(true_trace, config.forecast_error_pct, refresh_seed, slot)
                if config.forecast_error_pct > 0
                else true_trace
            )
            believed_curve = _corrected_curve(believed_curve, true_curve, visited_levels)
            current = _plan_or_best_effort(
                policy, job, believed_curve, believed_trace, slot + 1,
                total_work - residual, total_work,
            )
            charge_plan = {(ch.slot, ch.level): ch for ch in current.charges}
            plan_last_active = max(current.opened_slots(), default=-1)
            recomputes += 1
            timeline[-1] = replace(timeline[-1], recomputed=True)

    metrics = metrics_from_charges(
        realized, crossing, true_trace, total_work,
        power=job.power, mode=config.accounting_mode,
        slot_hours=true_trace.slot_hours, window_start=t,
    )
    work_done = total_work - residual
    met = done and metrics.completion_slot <= T + WORK_EPS
    return SimResult(
        carbon_g=metrics.carbon_g,
        compute_slot_hours=metrics.compute_slot_hours,
        completion_slot=metrics.completion_slot,
        met_deadline=met,
        work_done=work_done,
        policy=policy.label,
        timeline=tuple(timeline),
        recomputes=recomputes,
    )


def _relative_deviation(realized: float, believed: float) -> float:
    if abs(believed) > 1e-12:
        return abs(realized - believed) / abs(believed)
    return 0.0 if abs(realized) <= 1e-12 else math.inf


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    policy: str
    seed: int
    carbon_g: float
    compute_slot_hours: float
    completion_slot: float
    met_deadline: bool


@dataclass(frozen=True)
class SweepTable:
    axis: str
    rows: tuple[SweepRow, ...]
    omitted: int = 0

    def summary(self) -> dict:
        """Per-(value, policy) means, 95th percentiles, and savings."""
        cells: dict[tuple[float, str], list[SweepRow]] = {}
        for row in self.rows:
            cells.setdefault((row.axis_value, row.policy), []).append(row)
        out = []
        for (value, policy), rows in sorted(cells.items(), key=lambda kv: (kv[0][0], kv[0][1])):
            carbons = [r.carbon_g for r in rows]
            cell = {
                "axis_value": value,
                "policy": policy,
                "runs": len(rows),
                "mean_carbon_g": float(np.mean(carbons)),
                "p95_carbon_g": float(np.percentile(carbons, 95)),
                "mean_compute_slot_hours": float(np.mean([r.compute_slot_hours for r in rows])),
                "mean_completion_slot": float(np.mean([r.completion_slot for r in rows])),
                "met_deadline_rate": float(np.mean([r.met_deadline for r in rows])),
            }
            agnostic = cells.get((value, "agnostic"))
            if agnostic:
                savings = [
                    100.0 * (1.0 - r.carbon_g / a.carbon_g) if a.carbon_g > 0 else 0.0
                    for r, a in zip(rows, agnostic)
                ]
                cell["mean_savings_vs_agnostic_pct"] = float(np.mean(savings))
            out.append(cell)
        return {"axis": self.axis, "omitted": self.omitted, "cells": out}

    def to_csv(self) -> str:
        lines = ["axis_value,policy,seed,carbon_g,compute_slot_hours,completion_slot,met_deadline"]
        for r in self.rows:
            lines.append(
                f"{r.axis_value:g},{r.policy},{r.seed},{r.carbon_g!r},"
                f"{r.compute_slot_hours!r},{r.completion_slot!r},{str(r.met_deadline).lower()}"
            )
        return "\n".join(lines) + "\n"


def _with_agnostic(policies: Sequence[Policy]) -> list[Policy]:
    policies = list(policies)
    if not any(p.kind == "agnostic" for p in policies):
        policies.append(Policy(kind="agnostic"))
    return policies


def _scaled_cluster(job: JobSpec, curve: MarginalCapacityCurve, factor: int):
    """Grow the job's server bounds, continuing the curve's observed decay."""
    if factor < 1:
        raise ValueError(f"cluster scale factor must be >= 1, got {factor}")
    m2, M2 = job.min_servers * factor, job.max_servers * factor
    rebased = MarginalCapacityCurve(
        m=m2, M=m2 + (curve.M - curve.m), values=curve.values, name=curve.name
    )
    curve2 = extrapolate_curve(rebased, M2)
    job2 = replace(job, min_servers=m2, max_servers=M2)
    return job2, curve2


def _apply_axis(axis, value, job, curve, config, policies):
    if axis == "completion_time":
        span = int(value)
        job2 = replace(job, completion_slot=job.arrival_slot + span)
        return job2, curve, config, policies
    if axis == "job_length":
        ratio = job.window_slots / job.base_length_slots if job.base_length_slots > 0 else 1.0
        length = float(value)
        span = max(math.ceil(length - WORK_EPS), round(ratio * length))
        job2 = replace(job, base_length_slots=length, completion_slot=job.arrival_slot + span)
        return job2, curve, config, policies
    if axis == "cluster_size":
        job2, curve2 = _scaled_cluster(job, curve, int(value))
        return job2, curve2, config, policies
    if axis == "scale_factor":
        scaled = [replace(p, scale=int(value)) if p.kind == "static" else p for p in policies]
        return job, curve, config, scaled
    if axis == "denial":
        return job, curve, replace(config, denial_probability=float(value)), policies
    if axis == "forecast_error":
        return job, curve, replace(config, forecast_error_pct=float(value)), policies
    if axis == "profile_error":
        return job, curve, replace(config, profile_error_pct=float(value)), policies
    raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")


def sweep_parameter(
    job: JobSpec,
    curve: MarginalCapacityCurve,
    trace: CarbonTrace,
    axis: str,
    values: Sequence[float],
    policies: Sequence[Policy],
    config: SimConfig = SimConfig(),
    runs: int = 1,
) -> SweepTable:
    """One row per (axis value, policy, seed); infeasible runs keep their row."""
    policies = _with_agnostic(policies)
    rows = []
    for value in values:
        job_v, curve_v, config_v, policies_v = _apply_axis(
            axis, value, job, curve, config, policies
        )
        for policy in policies_v:
            for run in range(runs):
                cfg = replace(config_v, rng_seed=config.rng_seed + run)
                result = simulate(job_v, curve_v, trace, policy, cfg)
                rows.append(
                    SweepRow(
                        axis_value=float(value),
                        policy=result.policy,
                        seed=cfg.rng_seed,
                        carbon_g=result.carbon_g,
                        compute_slot_hours=result.compute_slot_hours,
                        completion_slot=result.completion_slot,
                        met_deadline=result.met_deadline,
                    )
                )
    return SweepTable(axis=axis, rows=tuple(rows))


def sweep_start_times(
    job: JobSpec,
    curve: MarginalCapacityCurve,
    trace: CarbonTrace,
    policies: Sequence[Policy],
    config: SimConfig = SimConfig(),
    stride: int = 1,
    runs: int = 1,
) -> SweepTable:
    """Re-run the job at every stride-th start offset of the trace."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1 slot, got {stride}")
    policies = _with_agnostic(policies)
    window = job.window_slots
    rows = []
    omitted = 0
    for offset in range(0, len(trace), stride):
        if offset + window > len(trace):
            omitted += 1
            continue
        job_o = replace(
            job, arrival_slot=offset, completion_slot=offset + window
        )
        for policy in policies:
            for run in range(runs):
                cfg = replace(config, rng_seed=config.rng_seed + run)
                result = simulate(job_o, curve, trace, policy, cfg)
                rows.append(
                    SweepRow(
                        axis_value=float(offset),
                        policy=result.policy,
                        seed=cfg.rng_seed,
                        carbon_g=result.carbon_g,
                        compute_slot_hours=result.compute_slot_hours,
                        completion_slot=result.completion_slot,
                        met_deadline=result.met_deadline,
                    )
                )
    return SweepTable(axis="start_time", rows=tuple(rows), omitted=omitted)
