"""Schedule planners: the greedy carbon-scaling policy and its baselines.

Every planner is a pure function of (job, curve, forecast) returning a
:class:`~carbonsched.schedule.Schedule`. Deadline-aware planners place
work inside [arrival, completion); the threshold variant is deliberately
deadline-unaware and keeps running until the trace ends if it must.
Infeasibility raises instead of silently degrading; the simulator layers
best-effort behaviour on top where needed.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .curves import MarginalCapacityCurve, synthetic_curve
from .errors import EnumerationBudgetError, InfeasibleError, JobError
from .schedule import (
    WORK_EPS,
    JobSpec,
    Schedule,
    _increment,
    _score,
    build_charges,
    make_schedule,
    work_requirement,
)
from .trace import CarbonTrace

ORACLE_BUDGET = 10_000_000

GREEDY = "greedy"
AGNOSTIC = "agnostic"
SR_DEADLINE = "sr_deadline"
SR_THRESHOLD = "sr_threshold"
STATIC = "static"
POLICY_KINDS = (GREEDY, AGNOSTIC, SR_DEADLINE, SR_THRESHOLD, STATIC)


def _check_window(trace: CarbonTrace, start: int, end: int):
    if start < 0 or end > len(trace):
        raise JobError(
            f"forecast covers slots [0, {len(trace)}), window [{start}, {end}) requested"
        )


def _job_curve(job: JobSpec, curve: Optional[MarginalCapacityCurve]) -> MarginalCapacityCurve:
    """Baselines that only ever run at m servers default to a flat curve."""
    if curve is None:
        return synthetic_curve("linear", job.min_servers, job.max_servers)
    if curve.m != job.min_servers or curve.M != job.max_servers:
        raise JobError(
            f"curve bounds [{curve.m}, {curve.M}] do not match job bounds "
            f"[{job.min_servers}, {job.max_servers}]"
        )
    return curve


def plan_greedy(
    window_start: int,
    n_slots: int,
    work: float,
    curve: MarginalCapacityCurve,
    trace: CarbonTrace,
    label: str = GREEDY,
) -> Schedule:
    """Fill the window with the increments of highest work per unit carbon.

    Keeps one candidate increment per slot (the opening block of m
    servers while the slot is empty, the next single server once opened;
    full slots drop out) and repeatedly commits the best-scoring
    candidate until the committed work covers the requirement. Ties break
    on (earlier slot, lower server index). The final increment may
    overshoot; accounting prorates it, the allocation keeps it.
    """
    _check_window(trace, window_start, window_start + n_slots)
    eps = WORK_EPS * max(1.0, work)
    if work <= eps:
        return make_schedule((), window_start, curve, max(work, 0.0), trace, label)
    max_work = n_slots * curve.work_at(curve.M)
    if work > max_work + eps:
        raise InfeasibleError(
            f"work {work} exceeds window capacity {max_work}", max_work=max_work
        )
    alloc = [0] * n_slots
    heap: list[tuple[float, int, int]] = []
    for i in range(n_slots):
        slot = window_start + i
        heapq.heappush(heap, (-_score(curve, curve.m, trace[slot]), slot, curve.m))
    committed = 0.0
    while committed < work - eps:
        _, slot, level = heapq.heappop(heap)
        alloc[slot - window_start] = level
        committed += _increment(curve, level)[1]
        if level + 1 <= curve.M:
            heapq.heappush(heap, (-_score(curve, level + 1, trace[slot]), slot, level + 1))
    return make_schedule(alloc, window_start, curve, work, trace, label)


def greedy_schedule(
    job: JobSpec, curve: MarginalCapacityCurve, forecast: CarbonTrace
) -> Schedule:
    return plan_greedy(
        job.arrival_slot,
        job.window_slots,
        work_requirement(job, curve),
        curve,
        forecast,
    )


def _lowest_carbon_slots(
    trace: CarbonTrace, window_start: int, n_slots: int, count: int
) -> list[int]:
    """The ``count`` cheapest slots of the window, ties to the earlier slot."""
    slots = sorted(
        range(window_start, window_start + n_slots), key=lambda s: (trace[s], s)
    )
    return slots[:count]


def carbon_agnostic(
    job: JobSpec, forecast: CarbonTrace, curve: Optional[MarginalCapacityCurve] = None
) -> Schedule:
    """Status quo: run at m servers from arrival until the work is done."""
    curve = _job_curve(job, curve)
    work = work_requirement(job, curve)
    return _plan_agnostic(job.arrival_slot, job.window_slots, work, curve, forecast)


def _plan_agnostic(window_start, n_slots, work, curve, trace) -> Schedule:
    _check_window(trace, window_start, window_start + n_slots)
    needed = math.ceil(work - WORK_EPS * max(1.0, work))
    if needed <= 0:
        return make_schedule((), window_start, curve, max(work, 0.0), trace, AGNOSTIC)
    if needed > n_slots:
        raise InfeasibleError(
            f"{needed} slots at minimum servers do not fit in {n_slots}-slot window",
            max_work=float(n_slots),
        )
    alloc = [curve.m if i < needed else 0 for i in range(n_slots)]
    return make_schedule(alloc, window_start, curve, work, trace, AGNOSTIC)


def suspend_resume_deadline(
    job: JobSpec, forecast: CarbonTrace, curve: Optional[MarginalCapacityCurve] = None
) -> Schedule:
    """Run at m servers in the cheapest slots of the window, suspend elsewhere."""
    curve = _job_curve(job, curve)
    work = work_requirement(job, curve)
    return _plan_sr_deadline(job.arrival_slot, job.window_slots, work, curve, forecast)


def _plan_sr_deadline(window_start, n_slots, work, curve, trace) -> Schedule:
    _check_window(trace, window_start, window_start + n_slots)
    needed = math.ceil(work - WORK_EPS * max(1.0, work))
    if needed <= 0:
        return make_schedule((), window_start, curve, max(work, 0.0), trace, SR_DEADLINE)
    if needed > n_slots:
        raise InfeasibleError(
            f"{needed} slots at minimum servers do not fit in {n_slots}-slot window",
            max_work=float(n_slots),
        )
    alloc = [0] * n_slots
    for slot in _lowest_carbon_slots(trace, window_start, n_slots, needed):
        alloc[slot - window_start] = curve.m
    return make_schedule(alloc, window_start, curve, work, trace, SR_DEADLINE)


def nearest_rank_percentile(values: Sequence[float], p: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * N)-th smallest value."""
    if not values:
        raise ValueError("percentile of empty sequence")
    if not 0 <= p <= 100:
        raise ValueError(f"percentile must be in [0, 100], got {p}")
    ordered = sorted(values)
    rank = max(1, math.ceil(p / 100.0 * len(ordered)))
    return ordered[rank - 1]


def suspend_resume_threshold(
    job: JobSpec,
    trace: CarbonTrace,
    percentile: float = 25.0,
    curve: Optional[MarginalCapacityCurve] = None,
) -> Schedule:
    """Deadline-unaware: run at m only while intensity is below a percentile.

    The threshold is the nearest-rank percentile of the trace over the
    whole horizon from arrival to the end of the trace; completion may
    overrun the job's stated completion time.
    """
    curve = _job_curve(job, curve)
    work = work_requirement(job, curve)
    return _plan_sr_threshold(job.arrival_slot, work, curve, trace, percentile)


def _plan_sr_threshold(window_start, work, curve, trace, percentile) -> Schedule:
    needed = math.ceil(work - WORK_EPS * max(1.0, work))
    if needed <= 0:
        return make_schedule((), window_start, curve, max(work, 0.0), trace, SR_THRESHOLD)
    _check_window(trace, window_start, window_start + 1)
    horizon = range(window_start, len(trace))
    threshold = nearest_rank_percentile([trace[s] for s in horizon], percentile)
    chosen = [s for s in horizon if trace[s] <= threshold][:needed]
    if len(chosen) < needed:
        raise InfeasibleError(
            f"trace ends after {len(chosen)} of {needed} below-threshold slots",
            max_work=float(len(chosen)),
            progress=float(len(chosen)),
        )
    alloc = [0] * (chosen[-1] + 1 - window_start)
    for slot in chosen:
        alloc[slot - window_start] = curve.m
    return make_schedule(alloc, window_start, curve, work, trace, SR_THRESHOLD)


def static_scale(
    job: JobSpec, curve: MarginalCapacityCurve, forecast: CarbonTrace, k: int
) -> Schedule:
    """Run at a fixed scale factor of k servers in the cheapest slots."""
    curve = _job_curve(job, curve)
    work = work_requirement(job, curve)
    return _plan_static(job.arrival_slot, job.window_slots, work, curve, forecast, k)


def _plan_static(window_start, n_slots, work, curve, trace, k) -> Schedule:
    if not curve.m <= k <= curve.M:
        raise JobError(f"static scale {k} outside [{curve.m}, {curve.M}]")
    _check_window(trace, window_start, window_start + n_slots)
    label = f"{STATIC}:{k}"
    eps = WORK_EPS * max(1.0, work)
    if work <= eps:
        return make_schedule((), window_start, curve, max(work, 0.0), trace, label)
    per_slot = curve.work_at(k)
    needed = math.ceil((work - eps) / per_slot)
    if needed > n_slots:
        raise InfeasibleError(
            f"{needed} slots at {k} servers do not fit in {n_slots}-slot window",
            max_work=n_slots * per_slot,
        )
    alloc = [0] * n_slots
    for slot in _lowest_carbon_slots(trace, window_start, n_slots, needed):
        alloc[slot - window_start] = k
    return make_schedule(alloc, window_start, curve, work, trace, label)


def recompute(
    job: JobSpec,
    curve: MarginalCapacityCurve,
    updated_forecast: CarbonTrace,
    current_slot: int,
    work_done: float,
) -> Schedule:
    """Replan the remainder of the job from the current slot.

    Returns the greedy schedule over [current_slot, completion) for the
    residual work, against the refreshed forecast and (possibly updated)
    curve.
    """
    if not job.arrival_slot <= current_slot <= job.completion_slot:
        raise JobError(
            f"current slot {current_slot} outside "
            f"[{job.arrival_slot}, {job.completion_slot}]"
        )
    total = work_requirement(job, curve)
    if work_done < -WORK_EPS or work_done > total + WORK_EPS * max(1.0, total):
        raise JobError(f"work done {work_done} outside [0, {total}]")
    residual = max(0.0, total - work_done)
    return plan_greedy(
        current_slot,
        job.completion_slot - current_slot,
        residual,
        curve,
        updated_forecast,
    )


def exchange_gamma(c_i: float, c_k: float, mc_j: float, mc_l: float) -> float:
    """Carbon cost of moving one increment's work to a better-scoring slot.

    When the replacement increment is at least as productive, the work
    fits inside slot k alone; otherwise the overflow stays in slot i.
    Used to property-check that any schedule holding a worse increment
    while a better one is free can be improved.
    """
    if min(c_i, c_k, mc_j, mc_l) <= 0:
        raise ValueError("all exchange inputs must be positive")
    if mc_l >= mc_j:
        return c_k * mc_j / mc_l
    return c_k + ((mc_j - mc_l) / mc_j) * c_i


def brute_force_optimal(
    job: JobSpec, curve: MarginalCapacityCurve, trace: CarbonTrace
) -> Schedule:
    """Exhaustive minimum-carbon schedule; test-scale verification oracle.

    Enumerates every allocation vector in ({0} u [m, M])^n, keeps the
    vectors whose least-efficient committed increment is still needed
    (dropping it would leave the work uncovered, so prorating it is
    well-defined), and returns one with minimal prorated carbon.
    """
    n = job.window_slots
    m, M = curve.m, curve.M
    options = [0] + list(range(m, M + 1))
    if len(options) ** n > ORACLE_BUDGET:
        raise EnumerationBudgetError(
            f"{len(options)}^{n} exceeds the {ORACLE_BUDGET} vector budget"
        )
    work = work_requirement(job, curve)
    window_start = job.arrival_slot
    _check_window(trace, window_start, window_start + n)
    eps = WORK_EPS * max(1.0, work)

    if m == 1:
        return _oracle_fast(job, curve, trace, work, options)

    best = None
    best_carbon = math.inf
    for vector in itertools.product(options, repeat=n):
        charges, crossing = build_charges(vector, window_start, curve, work, trace)
        total = sum(ch.work for ch in charges)
        if total < work - eps or crossing is None:
            continue
        if any(ch.fraction == 0.0 for ch in charges):
            continue  # an increment past the crossing: not minimal
        carbon = sum(trace[ch.slot] * ch.servers * ch.fraction for ch in charges)
        if carbon < best_carbon - 1e-15:
            best_carbon = carbon
            best = vector
    if best is None:
        raise InfeasibleError(f"no allocation vector covers {work} work units")
    return make_schedule(best, window_start, curve, work, trace, "oracle")


def _oracle_fast(job, curve, trace, work, options):
    """Closed-form scoring of each vector for m = 1 (no block precedence)."""
    n = job.window_slots
    window_start = job.arrival_slot
    eps = WORK_EPS * max(1.0, work)
    # Per slot and allocation level: cumulative work/carbon and the
    # worst committed increment (highest carbon per work, ties to the
    # higher level: the last one the greedy order would commit).
    cum_work = []
    cum_carbon = []
    worst = []
    for i in range(n):
        c = trace[window_start + i]
        cw = {0: 0.0}
        cc = {0: 0.0}
        wt = {0: None}
        running_w = 0.0
        running_c = 0.0
        top = None
        for level in options[1:]:
            servers, w = _increment(curve, level)
            ratio = (servers * c) / w
            running_w += w
            running_c += servers * c
            if top is None or (ratio, level) >= (top[0], top[1]):
                top = (ratio, level, w, servers * c)
            cw[level] = running_w
            cc[level] = running_c
            wt[level] = top
        cum_work.append(cw)
        cum_carbon.append(cc)
        worst.append(wt)

    best = None
    best_carbon = math.inf
    for vector in itertools.product(options, repeat=n):
        total_w = 0.0
        total_c = 0.0
        marg = None
        for i, level in enumerate(vector):
            total_w += cum_work[i][level]
            total_c += cum_carbon[i][level]
            top = worst[i][level]
            if top is not None:
                key = (top[0], window_start + i, top[1])
                if marg is None or key > marg[0]:
                    marg = (key, top[2], top[3])
        if marg is None or total_w < work - eps:
            continue
        _, marg_w, marg_c = marg
        others = total_w - marg_w
        if others >= work - eps:
            continue  # dropping the worst increment keeps it feasible
        fraction = min(1.0, (work - others) / marg_w)
        carbon = total_c - (1.0 - fraction) * marg_c
        if carbon < best_carbon - 1e-15:
            best_carbon = carbon
            best = vector
    if best is None:
        raise InfeasibleError(f"no allocation vector covers {work} work units")
    return make_schedule(best, window_start, curve, work, trace, "oracle")


@dataclass(frozen=True)
class Policy:
    """A named policy choice, parseable from strings like ``static:2``."""

    kind: str
    percentile: float = 25.0
    scale: Optional[int] = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise JobError(f"unknown policy {self.kind!r}; choose from {POLICY_KINDS}")
        if self.kind == STATIC and self.scale is None:
            raise JobError("static policy needs a scale factor, e.g. static:2")

    @classmethod
    def parse(cls, text: str) -> "Policy":
        name, _, arg = text.partition(":")
        name = name.strip()
        if name == STATIC:
            try:
                return cls(kind=STATIC, scale=int(arg))
            except ValueError:
                raise JobError(f"static policy needs an integer scale, got {arg!r}") from None
        if name == SR_THRESHOLD:
            if arg:
                try:
                    return cls(kind=SR_THRESHOLD, percentile=float(arg))
                except ValueError:
                    raise JobError(
                        f"threshold policy needs a numeric percentile, got {arg!r}"
                    ) from None
            return cls(kind=SR_THRESHOLD)
        if arg:
            raise JobError(f"policy {name!r} takes no argument")
        return cls(kind=name)

    @property
    def label(self) -> str:
        if self.kind == STATIC:
            return f"{STATIC}:{self.scale}"
        if self.kind == SR_THRESHOLD:
            return f"{SR_THRESHOLD}:{self.percentile:g}"
        return self.kind

    @property
    def deadline_aware(self) -> bool:
        return self.kind != SR_THRESHOLD


def plan(
    policy: Policy,
    job: JobSpec,
    curve: MarginalCapacityCurve,
    trace: CarbonTrace,
    start_slot: Optional[int] = None,
    work_done: float = 0.0,
) -> Schedule:
    """Plan (or replan from ``start_slot``) under the given policy.

    The same dispatch serves initial planning and mid-run recomputation
    so every deadline-aware policy gets the same recompute machinery.
    """
    start = job.arrival_slot if start_slot is None else start_slot
    curve = _job_curve(job, curve)
    total = work_requirement(job, curve)
    residual = max(0.0, total - work_done)
    n = job.completion_slot - start
    if policy.kind == GREEDY:
        return plan_greedy(start, n, residual, curve, trace)
    if policy.kind == AGNOSTIC:
        return _plan_agnostic(start, n, residual, curve, trace)
    if policy.kind == SR_DEADLINE:
        return _plan_sr_deadline(start, n, residual, curve, trace)
    if policy.kind == STATIC:
        return _plan_static(start, n, residual, curve, trace, policy.scale)
    return _plan_sr_threshold(start, residual, curve, trace, policy.percentile)
