"""Marginal capacity curves and the throughput profiles they come from.

The scaling behaviour of an elastic job is captured by one value per
server count: how much extra work per slot the j-th server contributes.
Values are normalized so that the minimum allocation of ``m`` servers
performs exactly 1 unit of work per slot; a job of length ``l`` at the
minimum allocation therefore needs ``W = l`` units in total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CurveError

MIN_MARGINAL = 1e-6  # floor for perturbed/extrapolated marginals


@dataclass(frozen=True)
class PowerModel:
    """Constant draw per allocated server, in watts."""

    per_server_power: float

    def __post_init__(self):
        if not self.per_server_power > 0:
            raise CurveError(f"per-server power must be positive, got {self.per_server_power}")


@dataclass(frozen=True)
class MarginalCapacityCurve:
    """Per-server marginal work values for server counts m..M.

    ``values[0]`` is the aggregate capacity of the minimum allocation and
    is always 1 by normalization; ``values[j-m]`` for j > m is the extra
    work per slot from the j-th server, in the same unit. Construction
    does not force monotonicity: perturbed curves model erroneous beliefs
    and may violate it (see :attr:`is_monotone`); validated paths reject
    non-monotone curves explicitly.
    """

    m: int
    M: int
    values: tuple[float, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.m < 1 or self.M < self.m:
            raise CurveError(f"invalid server bounds [{self.m}, {self.M}]")
        if len(self.values) != self.M - self.m + 1:
            raise CurveError(
                f"expected {self.M - self.m + 1} values for [{self.m}, {self.M}], "
                f"got {len(self.values)}"
            )
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if any(not math.isfinite(v) or v <= 0 for v in self.values):
            raise CurveError("marginal values must be finite and strictly positive")
        if abs(self.values[0] - 1.0) > 1e-9:
            raise CurveError(f"baseline marginal must be normalized to 1, got {self.values[0]}")

    def marginal(self, j: int) -> float:
        """Marginal work of the j-th server (j = m gives the baseline block)."""
        return self.values[j - self.m]

    @property
    def is_monotone(self) -> bool:
        return all(a >= b - 1e-12 for a, b in zip(self.values, self.values[1:]))

    def violations(self) -> tuple[int, ...]:
        """Server counts j where MC_j < MC_{j+1} wrongly increases."""
        return tuple(
            j for j, (a, b) in enumerate(zip(self.values, self.values[1:]), start=self.m)
            if b > a + 1e-12
        )

    def work_at(self, servers: int) -> float:
        """Aggregate work per slot at ``servers`` allocated (0 when suspended)."""
        if servers == 0:
            return 0.0
        if servers < self.m or servers > self.M:
            raise CurveError(f"allocation {servers} outside [{self.m}, {self.M}]")
        return float(sum(self.values[: servers - self.m + 1]))


def validated_curve(m: int, M: int, values, name: str = "") -> MarginalCapacityCurve:
    """Build a curve and reject it unless marginals are non-increasing."""
    curve = MarginalCapacityCurve(m=m, M=M, values=tuple(values), name=name)
    bad = curve.violations()
    if bad:
        raise CurveError(
            f"marginal capacity must be non-increasing; increases after server(s) {list(bad)}",
            indices=bad,
        )
    return curve


@dataclass(frozen=True)
class ThroughputProfile:
    """Measured throughput (work units per slot) at sampled server counts.

    ``alpha`` is how long each level was profiled (minutes) and ``beta``
    the sampling stride; both are metadata carried for reporting only.
    """

    samples: dict[int, float]
    m: int
    M: int
    alpha: float = 1.0
    beta: int = 1

    def __post_init__(self):
        if self.m < 1 or self.M < self.m:
            raise CurveError(f"invalid server bounds [{self.m}, {self.M}]")
        if self.m not in self.samples or self.M not in self.samples:
            raise CurveError(f"profile must include throughput at m={self.m} and M={self.M}")
        ordered = sorted(self.samples.items())
        last = 0.0
        for j, th in ordered:
            if j < self.m or j > self.M:
                raise CurveError(f"sampled server count {j} outside [{self.m}, {self.M}]")
            if th <= 0:
                raise CurveError(f"throughput at {j} servers must be positive, got {th}")
            if th < last:
                raise CurveError(f"throughput must be non-decreasing, drops at {j} servers")
            last = th
        if self.beta < 1:
            raise CurveError(f"sampling stride must be >= 1, got {self.beta}")
        object.__setattr__(self, "samples", dict(ordered))


def curve_from_profile(profile: ThroughputProfile, name: str = "") -> MarginalCapacityCurve:
    """Interpolate sampled throughputs and normalize to a capacity curve.

    Missing server counts are filled linearly in throughput space (the
    simplest monotone-preserving choice). The baseline allocation is
    normalized to 1 unit of work per slot; marginals above it are each
    server's throughput gain over the per-server baseline Th_m / m.
    Raises when the resulting marginals are not non-increasing, naming
    the offending server counts, so the caller can re-profile.
    """
    sampled_j = np.array(sorted(profile.samples), dtype=float)
    sampled_th = np.array([profile.samples[int(j)] for j in sampled_j], dtype=float)
    levels = np.arange(profile.m, profile.M + 1)
    th = np.interp(levels, sampled_j, sampled_th)

    baseline = profile.samples[profile.m] / profile.m
    values = [1.0]
    # saturated scaling (zero throughput gain) floors at epsilon: the curve
    # type requires positive marginals, and an epsilon increment never wins
    values.extend(
        max(MIN_MARGINAL, (th[k] - th[k - 1]) / baseline) for k in range(1, len(levels))
    )
    return validated_curve(profile.m, profile.M, values, name=name)


def synthetic_curve(kind: str, m: int, M: int, decay: float = 0.7) -> MarginalCapacityCurve:
    """Test-fixture curves: ``linear`` (flat at 1) or ``diminishing`` (d^k)."""
    if m < 1 or M < m:
        raise CurveError(f"invalid server bounds [{m}, {M}]")
    if kind == "linear":
        values = [1.0] * (M - m + 1)
    elif kind == "diminishing":
        if not 0 < decay <= 1:
            raise CurveError(f"decay must be in (0, 1], got {decay}")
        values = [decay**k for k in range(M - m + 1)]
    else:
        raise CurveError(f"unknown curve kind {kind!r}")
    return MarginalCapacityCurve(m=m, M=M, values=tuple(values), name=f"{kind}")


def perturb_curve(curve: MarginalCapacityCurve, error_pct: float, seed) -> MarginalCapacityCurve:
    """Model profiling error: scale each marginal by 1+U(-X%,+X%), renormalize.

    The whole curve is divided by the perturbed baseline so the first
    value stays exactly 1. Monotonicity is deliberately not enforced; the
    result models an erroneous belief (check :attr:`is_monotone`).
    """
    if error_pct < 0:
        raise ValueError(f"error_pct must be >= 0, got {error_pct}")
    if error_pct == 0:
        return curve
    x = error_pct / 100.0
    rng = np.random.default_rng(seed)
    u = rng.uniform(-x, x, size=len(curve.values))
    scaled = np.asarray(curve.values) * (1.0 + u)
    scaled = np.maximum(scaled, MIN_MARGINAL)
    normalized = scaled / scaled[0]
    return MarginalCapacityCurve(
        m=curve.m,
        M=curve.M,
        values=tuple(max(MIN_MARGINAL, float(v)) for v in normalized),
        name=curve.name,
    )


def monotonize(curve: MarginalCapacityCurve) -> MarginalCapacityCurve:
    """Isotonic decreasing projection; an explicit escape hatch, never implicit."""
    values = list(curve.values)
    for i in range(1, len(values)):
        values[i] = min(values[i], values[i - 1])
    return MarginalCapacityCurve(m=curve.m, M=curve.M, values=tuple(values), name=curve.name)


def extrapolate_curve(curve: MarginalCapacityCurve, new_M: int) -> MarginalCapacityCurve:
    """Extend marginals geometrically for cluster-size studies.

    Continues the decay ratio of the last two observed marginals (flat
    curves extend flat), floored at a small positive epsilon.
    """
    if new_M < curve.M:
        raise CurveError(f"new maximum {new_M} below current maximum {curve.M}")
    if new_M == curve.M:
        return curve
    values = list(curve.values)
    ratio = values[-1] / values[-2] if len(values) >= 2 else 1.0
    for _ in range(new_M - curve.M):
        values.append(max(MIN_MARGINAL, values[-1] * ratio))
    return MarginalCapacityCurve(m=curve.m, M=new_M, values=tuple(values), name=curve.name)
