"""Carbon-intensity traces: ingestion, validation, slicing, perturbation, stats.

A trace is the hourly (by default) grid carbon intensity of one region,
in gCO2eq/kWh. Traces are immutable; every transformation returns a new
object. All time arithmetic elsewhere in the package happens in slot
indices; the slot duration only matters when converting to energy.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import TraceError

CSV_HEADER = ("timestamp", "carbon_intensity_avg")
DEFAULT_SLOT = timedelta(hours=1)


@dataclass(frozen=True)
class CarbonTrace:
    """Ordered per-slot carbon intensities for one region."""

    region: str
    start: datetime
    intensities: tuple[float, ...]
    slot_duration: timedelta = field(default=DEFAULT_SLOT)

    def __post_init__(self):
        if len(self.intensities) == 0:
            raise TraceError("empty trace")
        for i, v in enumerate(self.intensities):
            if not math.isfinite(v) or v < 0:
                raise TraceError(f"intensity at slot {i} must be finite and >= 0, got {v}")
        if self.slot_duration <= timedelta(0):
            raise TraceError(f"slot duration must be positive, got {self.slot_duration}")
        object.__setattr__(self, "intensities", tuple(float(v) for v in self.intensities))

    def __len__(self):
        return len(self.intensities)

    def __getitem__(self, slot: int) -> float:
        return self.intensities[slot]

    @property
    def slot_hours(self) -> float:
        return self.slot_duration.total_seconds() / 3600.0


@dataclass(frozen=True)
class RegionStats:
    """Summary statistics of a trace; CoV predicts achievable savings."""

    mean: float
    std_dev: float
    coefficient_of_variation: float


def _parse_timestamp(text: str, line: int) -> datetime:
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError:
        raise TraceError(f"invalid ISO-8601 timestamp {text!r}", line=line) from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def parse_trace(stream, region: str = "unknown") -> CarbonTrace:
    """Parse the trace CSV format: ``timestamp,carbon_intensity_avg`` rows.

    Rows must be strictly increasing in time with constant spacing; gaps
    are rejected rather than interpolated. Errors name the offending
    1-based line (the header is line 1).
    """
    if isinstance(stream, (str, bytes)):
        stream = io.StringIO(stream.decode() if isinstance(stream, bytes) else stream)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise TraceError("empty trace") from None
    if [h.strip() for h in header] != list(CSV_HEADER):
        raise TraceError(f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}", line=1)

    timestamps: list[datetime] = []
    values: list[float] = []
    spacing: timedelta | None = None
    for line, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise TraceError(f"expected 2 fields, got {len(row)}", line=line)
        ts = _parse_timestamp(row[0], line)
        try:
            value = float(row[1])
        except ValueError:
            raise TraceError(f"invalid intensity {row[1]!r}", line=line) from None
        if not math.isfinite(value):
            raise TraceError(f"intensity must be finite, got {row[1]}", line=line)
        if value < 0:
            raise TraceError(f"negative intensity {value}", line=line)
        if timestamps:
            delta = ts - timestamps[-1]
            if delta <= timedelta(0):
                raise TraceError("timestamps must be strictly increasing", line=line)
            if spacing is None:
                spacing = delta
            elif delta != spacing:
                raise TraceError(
                    f"inconsistent slot spacing: expected {spacing}, got {delta}", line=line
                )
        timestamps.append(ts)
        values.append(value)

    if not values:
        raise TraceError("empty trace")
    return CarbonTrace(
        region=region,
        start=timestamps[0],
        intensities=tuple(values),
        slot_duration=spacing if spacing is not None else DEFAULT_SLOT,
    )


def serialize_trace(trace: CarbonTrace) -> str:
    """Render a trace back to the CSV format accepted by :func:`parse_trace`."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for i, value in enumerate(trace.intensities):
        ts = trace.start + i * trace.slot_duration
        writer.writerow([ts.isoformat().replace("+00:00", "Z"), repr(value)])
    return out.getvalue()


def region_stats(trace: CarbonTrace) -> RegionStats:
    """Population mean/std over all slots; CoV = std/mean (0 when mean is 0)."""
    values = np.asarray(trace.intensities, dtype=float)
    mean = float(values.mean())
    std = float(values.std())  # population std: summary statistic, not an estimator
    cov = std / mean if mean > 0 else 0.0
    return RegionStats(mean=mean, std_dev=std, coefficient_of_variation=cov)


def slice_trace(trace: CarbonTrace, start_slot: int, n: int) -> CarbonTrace:
    """Sub-trace of ``n`` slots beginning at ``start_slot``."""
    if start_slot < 0 or n < 0 or start_slot + n > len(trace):
        raise TraceError(
            f"slice [{start_slot}, {start_slot + n}) out of range for trace of length {len(trace)}"
        )
    return replace(
        trace,
        start=trace.start + start_slot * trace.slot_duration,
        intensities=trace.intensities[start_slot : start_slot + n],
    )


def perturb_forecast(trace: CarbonTrace, error_pct: float, seed) -> CarbonTrace:
    """Model forecast error: each slot scaled by an independent 1+U(-X%,+X%).

    Clamped at zero (negative intensity is physically meaningless) and
    deterministic for a fixed seed.
    """
    if error_pct < 0:
        raise ValueError(f"error_pct must be >= 0, got {error_pct}")
    if error_pct == 0:
        return trace
    x = error_pct / 100.0
    rng = np.random.default_rng(seed)
    u = rng.uniform(-x, x, size=len(trace))
    values = np.asarray(trace.intensities) * (1.0 + u)
    return replace(trace, intensities=tuple(max(0.0, float(v)) for v in values))


def synthetic_diurnal_trace(
    n_slots: int,
    mean: float = 200.0,
    amplitude: float = 100.0,
    period: int = 24,
    noise_pct: float = 0.0,
    seed=0,
    region: str = "synthetic",
) -> CarbonTrace:
    """Sinusoidal day/night intensity pattern, optionally with relative noise.

    Used by sweeps and tests as a stand-in for real regional traces; the
    floor at zero keeps values physical when amplitude approaches mean.
    """
    if n_slots < 1:
        raise ValueError("n_slots must be >= 1")
    slots = np.arange(n_slots)
    values = mean + amplitude * np.sin(2.0 * np.pi * slots / period)
    if noise_pct > 0:
        rng = np.random.default_rng(seed)
        values = values * (1.0 + rng.uniform(-noise_pct / 100.0, noise_pct / 100.0, size=n_slots))
    values = np.maximum(values, 0.0)
    return CarbonTrace(
        region=region,
        start=datetime(2021, 1, 1, tzinfo=timezone.utc),
        intensities=tuple(float(v) for v in values),
    )
