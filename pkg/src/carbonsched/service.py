"""Stateless what-if HTTP service for scheduling and simulated execution.

Every input travels in the request body; the only server-side state is a
read-only trace library loaded at startup. Identical requests (seeds
included) produce identical responses, so clients can cache and share
scenario URLs. Validation failures return 400 with field-level messages,
infeasible jobs 422 with the maximum achievable work, unknown regions or
presets 404, and oversized sweeps 413.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import __version__
from .curves import (
    MarginalCapacityCurve,
    PowerModel,
    ThroughputProfile,
    curve_from_profile,
    validated_curve,
)
from .errors import CarbonSchedError, InfeasibleError
from .policies import Policy
from .presets import PRESETS, preset_curve, preset_power
from .schedule import ACCOUNTING_MODES, PRORATED, JobSpec, schedule_to_dict
from .sim import SWEEP_AXES, SimConfig, simulate, sweep_parameter, sweep_start_times
from .trace import CarbonTrace, parse_trace, region_stats

DEFAULT_SEED = 42  # fixed so the UI redraws identically unless a caller opts out
DEFAULT_CELL_BUDGET = 20_000


class InlineTrace(BaseModel):
    model_config = ConfigDict(extra="forbid")
    intensities: list[float] = Field(min_length=1)
    slot_minutes: float = 60.0
    region: str = "inline"


class JobModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    name: str = "job"
    length_slots: float = Field(gt=0)
    min_servers: int = Field(default=1, ge=1)
    max_servers: int = Field(ge=1)
    completion_slots: int = Field(ge=1, description="slots from arrival to deadline")
    power_watts: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _invariants(self):
        if self.max_servers < self.min_servers:
            raise ValueError("max_servers must be >= min_servers")
        if self.completion_slots < self.length_slots:
            raise ValueError("completion_slots must be >= length_slots")
        return self


class CurveModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    mc: Optional[list[float]] = None
    throughput: Optional[dict[int, float]] = None
    preset: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        given = [s for s in (self.mc, self.throughput, self.preset) if s is not None]
        if len(given) != 1:
            raise ValueError("provide exactly one of mc, throughput, preset")
        return self


class ConfigModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    forecast_error_pct: float = Field(default=0.0, ge=0)
    profile_error_pct: float = Field(default=0.0, ge=0)
    denial_probability: float = Field(default=0.0, ge=0, le=1)
    recompute_threshold: Optional[float] = Field(default=0.05, ge=0)
    accounting_mode: str = PRORATED
    scaling_overhead_s: float = Field(default=0.0, ge=0)
    rng_seed: int = DEFAULT_SEED

    @model_validator(mode="after")
    def _mode(self):
        if self.accounting_mode not in ACCOUNTING_MODES:
            raise ValueError(f"accounting_mode must be one of {ACCOUNTING_MODES}")
        return self


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    region: Optional[str] = None
    trace: Optional[InlineTrace] = None
    start_offset: int = Field(default=0, ge=0)
    job: JobModel
    curve: CurveModel
    policies: list[str] = Field(min_length=1)
    config: ConfigModel = ConfigModel()

    @model_validator(mode="after")
    def _one_trace(self):
        if (self.region is None) == (self.trace is None):
            raise ValueError("provide exactly one of region, trace")
        return self


class AxisModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    name: str
    values: Optional[list[float]] = None
    stride: int = Field(default=1, ge=1)
    runs: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _known_axis(self):
        known = SWEEP_AXES + ("start_time",)
        if self.name not in known:
            raise ValueError(f"axis must be one of {known}")
        if self.name != "start_time" and not self.values:
            raise ValueError("axis values are required except for start_time")
        return self


class SweepRequest(SimulateRequest):
    axis: AxisModel


class ApiError(Exception):
    def __init__(self, status: int, message: str, **extra):
        self.status = status
        self.message = message
        self.extra = extra


def load_trace_dir(path: str | Path) -> dict[str, CarbonTrace]:
    """Read every ``*.csv`` in a directory as one region's trace."""
    traces = {}
    for file in sorted(Path(path).glob("*.csv")):
        with file.open() as handle:
            try:
                traces[file.stem] = parse_trace(handle, region=file.stem)
            except CarbonSchedError as err:
                raise CarbonSchedError(f"{file}: {err}") from err
    return traces


def _resolve_trace(request: SimulateRequest, traces: dict[str, CarbonTrace]) -> CarbonTrace:
    if request.region is not None:
        trace = traces.get(request.region)
        if trace is None:
            raise ApiError(404, f"unknown region {request.region!r}",
                           known=sorted(traces))
        return trace
    inline = request.trace
    return CarbonTrace(
        region=inline.region,
        start=datetime(2021, 1, 1, tzinfo=timezone.utc),
        intensities=tuple(inline.intensities),
        slot_duration=timedelta(minutes=inline.slot_minutes),
    )


def _resolve_curve(request: SimulateRequest) -> tuple[MarginalCapacityCurve, Optional[PowerModel]]:
    job = request.job
    spec = request.curve
    power = PowerModel(job.power_watts) if job.power_watts else None
    if spec.preset is not None:
        if spec.preset not in PRESETS:
            raise ApiError(404, f"unknown preset {spec.preset!r}", known=sorted(PRESETS))
        curve = preset_curve(spec.preset, job.min_servers, job.max_servers)
        return curve, power or preset_power(spec.preset)
    if spec.mc is not None:
        curve = validated_curve(job.min_servers, job.max_servers, spec.mc)
        return curve, power
    profile = ThroughputProfile(
        samples=spec.throughput, m=job.min_servers, M=job.max_servers
    )
    return curve_from_profile(profile), power


def _build_job(request: SimulateRequest, trace: CarbonTrace, power) -> JobSpec:
    job = request.job
    arrival = request.start_offset
    return JobSpec(
        name=job.name,
        arrival_slot=arrival,
        base_length_slots=job.length_slots,
        min_servers=job.min_servers,
        max_servers=job.max_servers,
        completion_slot=arrival + job.completion_slots,
        power=power,
    )


def _parse_policies(names: list[str]) -> list[Policy]:
    try:
        policies = [Policy.parse(name) for name in names]
    except CarbonSchedError as err:
        raise ApiError(400, str(err)) from err
    if not any(p.kind == "agnostic" for p in policies):
        policies.append(Policy(kind="agnostic"))
    return policies


def _check_feasible(job: JobSpec, curve: MarginalCapacityCurve, trace: CarbonTrace):
    """Infeasible jobs are a 422 carrying the most work the trace can serve."""
    served = min(job.completion_slot, len(trace)) - job.arrival_slot
    capacity = max(0, served) * curve.work_at(curve.M)
    if job.completion_slot > len(trace):
        raise ApiError(
            422,
            f"trace ends at slot {len(trace)}, before the completion slot "
            f"{job.completion_slot}; at most {capacity} work units are servable",
            max_achievable_work=capacity,
        )
    if job.base_length_slots > capacity + 1e-9:
        raise ApiError(
            422,
            f"job needs {job.base_length_slots} work units but the window holds "
            f"at most {capacity}",
            max_achievable_work=capacity,
        )


def _timeline_dicts(result):
    return [
        {
            "slot": r.slot,
            "requested_servers": r.requested_servers,
            "granted_servers": r.granted_servers,
            "intensity_actual": r.intensity_actual,
            "intensity_forecast": r.intensity_forecast,
            "work_done": r.work_done,
            "recomputed": r.recomputed,
        }
        for r in result.timeline
    ]


def create_app(
    traces: Optional[dict[str, CarbonTrace]] = None,
    cell_budget: int = DEFAULT_CELL_BUDGET,
) -> FastAPI:
    traces = dict(traces or {})
    app = FastAPI(title="carbonsched advisor", version=__version__)

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        detail = [
            {"field": ".".join(str(p) for p in err["loc"]), "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": detail})

    @app.exception_handler(ApiError)
    async def _api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"detail": exc.message, **exc.extra}
        )

    @app.exception_handler(CarbonSchedError)
    async def _domain_error_handler(request: Request, exc: CarbonSchedError):
        status = 422 if isinstance(exc, InfeasibleError) else 400
        body = {"detail": str(exc)}
        if isinstance(exc, InfeasibleError) and exc.max_work is not None:
            body["max_achievable_work"] = exc.max_work
        return JSONResponse(status_code=status, content=body)

    @app.get("/api/v1/regions")
    def regions():
        out = []
        for name, trace in traces.items():
            stats = region_stats(trace)
            out.append(
                {
                    "region": name,
                    "slots": len(trace),
                    "mean": stats.mean,
                    "cov": stats.coefficient_of_variation,
                }
            )
        out.sort(key=lambda r: (r["mean"], r["region"]))
        return out

    @app.get("/api/v1/presets")
    def presets():
        return [
            {
                "name": name,
                "decay": preset.decay,
                "power_watts": preset.power_watts,
                "note": preset.note,
            }
            for name, preset in sorted(PRESETS.items())
        ]

    @app.post("/api/v1/simulate")
    def run_simulation(request: SimulateRequest):
        trace = _resolve_trace(request, traces)
        curve, power = _resolve_curve(request)
        job = _build_job(request, trace, power)
        _check_feasible(job, curve, trace)
        policies = _parse_policies(request.policies)
        config = SimConfig(**request.config.model_dump())
        warnings = []
        if not curve.is_monotone:
            warnings.append(
                f"marginal capacity increases after server(s) {list(curve.violations())}"
            )
        results = {}
        for policy in policies:
            results[policy.label] = simulate(job, curve, trace, policy, config)
        agnostic_carbon = results["agnostic"].carbon_g
        body = {"policies": {}, "trace_excerpt": {}, "warnings": warnings}
        for label, result in results.items():
            savings = (
                100.0 * (1.0 - result.carbon_g / agnostic_carbon)
                if agnostic_carbon > 0
                else 0.0
            )
            requested = {r.slot: r.requested_servers for r in result.timeline}
            schedule_doc = {
                "window_start": job.arrival_slot,
                "allocations": [
                    requested.get(s, 0)
                    for s in range(job.arrival_slot, job.completion_slot)
                ],
                "policy": label,
                "metrics": {
                    "carbon_g": result.carbon_g,
                    "compute_slot_hours": result.compute_slot_hours,
                    "completion_slot": result.completion_slot,
                },
            }
            body["policies"][label] = {
                "schedule": schedule_doc,
                "metrics": {
                    "carbon_g": result.carbon_g,
                    "compute_slot_hours": result.compute_slot_hours,
                    "completion_slot": result.completion_slot,
                    "met_deadline": result.met_deadline,
                },
                "savings_vs_agnostic_pct": savings,
                "timeline": _timeline_dicts(result),
            }
            if not result.met_deadline:
                warnings.append(f"{label}: work unfinished at the end of the window")
        body["trace_excerpt"] = {
            "start_slot": job.arrival_slot,
            "slot_hours": trace.slot_hours,
            "intensities": [
                trace[s] for s in range(job.arrival_slot, job.completion_slot)
            ],
        }
        return body

    @app.post("/api/v1/sweep")
    def run_sweep(request: SweepRequest):
        trace = _resolve_trace(request, traces)
        curve, power = _resolve_curve(request)
        job = _build_job(request, trace, power)
        _check_feasible(job, curve, trace)
        policies = _parse_policies(request.policies)
        config = SimConfig(**request.config.model_dump())
        axis = request.axis
        if axis.name == "start_time":
            n_cells = (len(trace) // axis.stride + 1) * len(policies) * axis.runs
        else:
            n_cells = len(axis.values) * len(policies) * axis.runs
        if n_cells > cell_budget:
            raise ApiError(
                413,
                f"sweep of {n_cells} runs exceeds the budget of {cell_budget}",
                cell_budget=cell_budget,
            )
        if axis.name == "start_time":
            table = sweep_start_times(
                job, curve, trace, policies, config, stride=axis.stride, runs=axis.runs
            )
        else:
            table = sweep_parameter(
                job, curve, trace, axis.name, axis.values, policies, config,
                runs=axis.runs,
            )
        return {
            "axis": table.axis,
            "omitted": table.omitted,
            "rows": [
                {
                    "axis_value": r.axis_value,
                    "policy": r.policy,
                    "seed": r.seed,
                    "carbon_g": r.carbon_g,
                    "compute_slot_hours": r.compute_slot_hours,
                    "completion_slot": r.completion_slot,
                    "met_deadline": r.met_deadline,
                }
                for r in table.rows
            ],
            "summary": table.summary(),
        }

    app.state.traces = traces
    return app
