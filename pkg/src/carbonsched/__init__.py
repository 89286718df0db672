"""Carbon-aware scaling schedules for elastic batch jobs.

The package computes server-allocation schedules that minimize the
operational carbon of delay-tolerant, horizontally scalable batch work,
simulates their execution against real or synthetic grid-intensity
traces, and serves what-if analysis over HTTP.
"""

__version__ = "0.1.0"

from .curves import (
    MarginalCapacityCurve,
    PowerModel,
    ThroughputProfile,
    curve_from_profile,
    extrapolate_curve,
    monotonize,
    perturb_curve,
    synthetic_curve,
)
from .errors import (
    CarbonSchedError,
    CurveError,
    EnumerationBudgetError,
    InfeasibleError,
    JobError,
    TraceError,
)
from .policies import (
    Policy,
    brute_force_optimal,
    carbon_agnostic,
    exchange_gamma,
    greedy_schedule,
    recompute,
    static_scale,
    suspend_resume_deadline,
    suspend_resume_threshold,
)
from .schedule import (
    JobSpec,
    Schedule,
    ScheduleMetrics,
    compute_cost,
    planned_carbon,
    work_requirement,
)
from .sim import SimConfig, SimResult, simulate, sweep_parameter, sweep_start_times
from .trace import (
    CarbonTrace,
    RegionStats,
    parse_trace,
    perturb_forecast,
    region_stats,
    serialize_trace,
    slice_trace,
    synthetic_diurnal_trace,
)

__all__ = [name for name in dir() if not name.startswith("_")]
