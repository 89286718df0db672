"""Job descriptions, execution schedules, and carbon/cost accounting.

An execution schedule assigns each slot of the window either zero servers
(suspended) or an allocation in [m, M]. Accounting decomposes a schedule
into *increments*: opening a slot commits the m-server block as one unit
of work; each further server adds its marginal work. Two accounting modes
are offered:

* ``whole_slot`` charges every opened slot fully, matching back-of-the-
  envelope totals where a partially used slot costs a full slot.
* ``prorated`` charges increments in the order a greedy consumer would
  use them (best work-per-carbon first, blocks before their own extra
  servers) and prorates the increment on which the required work is
  reached, so charged work equals the requirement exactly.

Prorated is the default: it reflects that a job releases its marginal
capacity once the work is done.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .curves import MarginalCapacityCurve, PowerModel
from .errors import InfeasibleError, JobError
from .trace import CarbonTrace

WORK_EPS = 1e-9

WHOLE_SLOT = "whole_slot"
PRORATED = "prorated"
ACCOUNTING_MODES = (WHOLE_SLOT, PRORATED)


@dataclass(frozen=True)
class JobSpec:
    """An elastic batch job: when it arrives, how long it is, how it scales."""

    name: str
    arrival_slot: int
    base_length_slots: float
    min_servers: int
    max_servers: int
    completion_slot: int
    power: Optional[PowerModel] = None

    def __post_init__(self):
        if self.arrival_slot < 0:
            raise JobError(f"arrival slot must be >= 0, got {self.arrival_slot}")
        if self.base_length_slots < 0:
            raise JobError(f"job length must be >= 0, got {self.base_length_slots}")
        if self.min_servers < 1:
            raise JobError(f"minimum servers must be >= 1, got {self.min_servers}")
        if self.max_servers < self.min_servers:
            raise JobError(
                f"maximum servers {self.max_servers} below minimum {self.min_servers}"
            )
        if self.completion_slot < self.arrival_slot + self.base_length_slots:
            raise JobError(
                f"completion slot {self.completion_slot} before arrival + length "
                f"{self.arrival_slot + self.base_length_slots}"
            )

    @property
    def slack_slots(self) -> float:
        return self.completion_slot - (self.arrival_slot + self.base_length_slots)

    @property
    def window_slots(self) -> int:
        return self.completion_slot - self.arrival_slot


def work_requirement(job: JobSpec, curve: MarginalCapacityCurve) -> float:
    """Total work the job must perform: its length times baseline capacity 1."""
    if curve.m != job.min_servers:
        raise JobError(
            f"curve minimum {curve.m} does not match job minimum {job.min_servers}"
        )
    return job.base_length_slots * curve.values[0]


@dataclass(frozen=True)
class Charge:
    """One committed increment of a schedule and the fraction of it charged.

    ``level`` is the server index; ``level == m`` is the opening block of
    ``m`` servers worth 1 unit of work, higher levels are single servers
    worth their marginal. ``fraction`` is 1 for fully used increments, the
    prorated fraction on the increment where the work requirement is
    crossed, and 0 for committed increments past the crossing.
    """

    slot: int
    level: int
    servers: int
    work: float
    fraction: float


@dataclass(frozen=True)
class ScheduleMetrics:
    carbon_g: float
    compute_slot_hours: float
    completion_slot: float
    overallocation: float


@dataclass(frozen=True)
class Schedule:
    """Per-slot server allocation over [window_start, window_start + len)."""

    window_start: int
    allocations: tuple[int, ...]
    policy: str
    curve: MarginalCapacityCurve
    work: float
    charges: tuple[Charge, ...]
    slot_hours: float = 1.0

    def __post_init__(self):
        for i, a in enumerate(self.allocations):
            if a != 0 and not (self.curve.m <= a <= self.curve.M):
                raise JobError(
                    f"allocation {a} at slot {self.window_start + i} outside "
                    f"{{0}} or [{self.curve.m}, {self.curve.M}]"
                )

    @property
    def window_end(self) -> int:
        return self.window_start + len(self.allocations)

    def allocation_at(self, slot: int) -> int:
        if self.window_start <= slot < self.window_end:
            return self.allocations[slot - self.window_start]
        return 0

    def opened_slots(self) -> tuple[int, ...]:
        return tuple(
            self.window_start + i for i, a in enumerate(self.allocations) if a > 0
        )


def _increment(curve: MarginalCapacityCurve, level: int) -> tuple[int, float]:
    """(servers, work) of one increment; the block counts all m servers."""
    if level == curve.m:
        return curve.m, curve.values[0]
    return 1, curve.marginal(level)


def _score(curve: MarginalCapacityCurve, level: int, intensity: float) -> float:
    """Work per unit carbon of an increment: the greedy selection key."""
    servers, work = _increment(curve, level)
    if intensity == 0.0:
        return math.inf
    return work / (servers * intensity)


def consume_order(
    allocations: Sequence[int],
    window_start: int,
    curve: MarginalCapacityCurve,
    trace: CarbonTrace,
) -> list[tuple[int, int]]:
    """(slot, level) pairs of committed increments, best work-per-carbon first.

    Replays the greedy selection restricted to the increments the schedule
    actually committed: at every step the best-scoring increment whose
    slot is already opened up to the preceding level. Ties break on
    (earlier slot, lower level) so the order is deterministic.
    """
    heap: list[tuple[float, int, int]] = []
    limit: dict[int, int] = {}
    for i, alloc in enumerate(allocations):
        if alloc > 0:
            slot = window_start + i
            limit[slot] = alloc
            heapq.heappush(heap, (-_score(curve, curve.m, trace[slot]), slot, curve.m))
    order = []
    while heap:
        _, slot, level = heapq.heappop(heap)
        order.append((slot, level))
        if level + 1 <= limit[slot]:
            heapq.heappush(heap, (-_score(curve, level + 1, trace[slot]), slot, level + 1))
    return order


def build_charges(
    allocations: Sequence[int],
    window_start: int,
    curve: MarginalCapacityCurve,
    work: float,
    trace: CarbonTrace,
) -> tuple[tuple[Charge, ...], Optional[tuple[int, int]]]:
    """Assign charged fractions to a schedule's increments.

    Increments are consumed in :func:`consume_order` until ``work`` is
    reached; the crossing increment is prorated so charged work equals
    ``work`` exactly, and anything past it is charged zero. Returns the
    charges in (slot, level) order plus the crossing increment's key
    (None when the schedule cannot cover the work).
    """
    order = consume_order(allocations, window_start, curve, trace)
    fractions: dict[tuple[int, int], float] = {}
    crossing: Optional[tuple[int, int]] = None
    remaining = work
    for slot, level in order:
        _, w = _increment(curve, level)
        if crossing is not None:
            fractions[(slot, level)] = 0.0
        elif remaining >= w - WORK_EPS * max(1.0, work):
            fractions[(slot, level)] = 1.0
            remaining -= w
            if remaining <= WORK_EPS * max(1.0, work):
                crossing = (slot, level)
        else:
            fractions[(slot, level)] = remaining / w
            remaining = 0.0
            crossing = (slot, level)
    charges = []
    for slot, level in sorted(fractions):
        servers, w = _increment(curve, level)
        charges.append(
            Charge(slot=slot, level=level, servers=servers, work=w,
                   fraction=fractions[(slot, level)])
        )
    return tuple(charges), crossing


def metrics_from_charges(
    charges: Sequence[Charge],
    crossing: Optional[tuple[int, int]],
    trace: CarbonTrace,
    work: float,
    power: Optional[PowerModel] = None,
    mode: str = PRORATED,
    slot_hours: float = 1.0,
    window_start: int = 0,
) -> ScheduleMetrics:
    """Carbon, compute cost, and completion time implied by charged increments.

    Under unit power (``power`` is None) carbon is reported in abstract
    intensity x server x slot units. Completion is the end of the last
    opened slot, pulled back by the unused fraction of the crossing
    increment when that increment falls in the last slot.
    """
    if mode not in ACCOUNTING_MODES:
        raise ValueError(f"unknown accounting mode {mode!r}")
    energy = (power.per_server_power * slot_hours / 1000.0) if power else 1.0
    carbon = 0.0
    compute = 0.0
    committed_work = 0.0
    for ch in charges:
        frac = 1.0 if mode == WHOLE_SLOT else ch.fraction
        carbon += trace[ch.slot] * ch.servers * energy * frac
        compute += ch.servers * slot_hours * frac
        committed_work += ch.work
    if charges:
        last_slot = max(ch.slot for ch in charges)
        completion = float(last_slot + 1)
        if crossing is not None and crossing[0] == last_slot:
            cross_frac = next(
                ch.fraction for ch in charges if (ch.slot, ch.level) == crossing
            )
            completion -= 1.0 - cross_frac
    else:
        completion = float(window_start)
    return ScheduleMetrics(
        carbon_g=carbon,
        compute_slot_hours=compute,
        completion_slot=completion,
        overallocation=max(0.0, committed_work - work),
    )


def planned_carbon(
    schedule: Schedule,
    trace: CarbonTrace,
    power: Optional[PowerModel] = None,
    mode: str = PRORATED,
) -> ScheduleMetrics:
    """Score a schedule against a trace (normally the forecast it was built on)."""
    charges, crossing = build_charges(
        schedule.allocations, schedule.window_start, schedule.curve, schedule.work, trace
    )
    committed = sum(ch.work for ch in charges)
    if committed < schedule.work - WORK_EPS * max(1.0, schedule.work):
        raise InfeasibleError(
            f"schedule covers {committed} of {schedule.work} work units",
            max_work=committed,
        )
    return metrics_from_charges(
        charges, crossing, trace, schedule.work, power=power, mode=mode,
        slot_hours=schedule.slot_hours, window_start=schedule.window_start,
    )


def compute_cost(schedule: Schedule, mode: str = PRORATED) -> float:
    """Compute slot-hours charged to the schedule under the given mode."""
    if mode not in ACCOUNTING_MODES:
        raise ValueError(f"unknown accounting mode {mode!r}")
    total = 0.0
    for ch in schedule.charges:
        frac = 1.0 if mode == WHOLE_SLOT else ch.fraction
        total += ch.servers * schedule.slot_hours * frac
    return total


def make_schedule(
    allocations: Sequence[int],
    window_start: int,
    curve: MarginalCapacityCurve,
    work: float,
    trace: CarbonTrace,
    policy: str,
) -> Schedule:
    """Bundle an allocation vector with its charge plan."""
    charges, _ = build_charges(allocations, window_start, curve, work, trace)
    return Schedule(
        window_start=window_start,
        allocations=tuple(int(a) for a in allocations),
        policy=policy,
        curve=curve,
        work=work,
        charges=charges,
        slot_hours=trace.slot_hours,
    )


def schedule_to_dict(schedule: Schedule, metrics: ScheduleMetrics) -> dict:
    """The serialized schedule document shared by CLI, service, and UI."""
    return {
        "window_start": schedule.window_start,
        "allocations": list(schedule.allocations),
        "policy": schedule.policy,
        "metrics": {
            "carbon_g": metrics.carbon_g,
            "compute_slot_hours": metrics.compute_slot_hours,
            "completion_slot": metrics.completion_slot,
        },
    }
