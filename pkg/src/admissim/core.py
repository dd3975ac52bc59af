"""Domain types shared across the simulator, plus SLA compliance evaluation.

Times are plain floats (seconds since simulation start). Tier indices are
0-based internally; scenario files use 1-based indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field


# Session terminal / lifecycle states.
PENDING = "pending"
THINKING = "thinking"
WAITING = "waiting"
COMPLETED = "completed"
ABANDONED = "abandoned"
REJECTED = "rejected"

TERMINAL_STATES = frozenset({COMPLETED, ABANDONED, REJECTED})


class ConfigError(Exception):
    """A scenario or parameter failed validation."""


class InternalConsistencyError(Exception):
    """The engine detected an impossible state (e.g. event scheduled in the past)."""


@dataclass(frozen=True)
class SlaSpec:
    """Service level agreement: per-tier 95th-percentile response-time caps,
    the minimum guaranteed admission rate, and the compliance check interval."""

    rt_limits: tuple[float, ...]   # seconds, one per tier
    lambda_min: float              # sessions/second
    check_interval: float          # seconds

    def validate(self) -> None:
        if not self.rt_limits:
            raise ConfigError("sla.rt_limits must not be empty")
        for i, lim in enumerate(self.rt_limits):
            if lim <= 0:
                raise ConfigError(f"sla.rt_limits[{i}] must be > 0, got {lim}")
        if self.lambda_min < 0:
            raise ConfigError(f"sla.lambda_min must be >= 0, got {self.lambda_min}")
        if self.check_interval <= 0:
            raise ConfigError(f"sla.check_interval must be > 0, got {self.check_interval}")


@dataclass(frozen=True)
class TierSpec:
    servers: int
    mean_service_time: float  # seconds


@dataclass(frozen=True)
class ClusterSpec:
    """Ordered tier list; index 0 is the front tier."""

    tiers: tuple[TierSpec, ...]

    @property
    def n_tiers(self) -> int:
        return len(self.tiers)

    def validate(self) -> None:
        if not self.tiers:
            raise ConfigError("cluster.tiers must not be empty")
        for i, t in enumerate(self.tiers):
            if t.servers < 1:
                raise ConfigError(f"cluster.tiers[{i}].servers must be >= 1, got {t.servers}")
            if t.mean_service_time <= 0:
                raise ConfigError(
                    f"cluster.tiers[{i}].mean_service_time must be > 0, got {t.mean_service_time}"
                )


@dataclass
class SessionRecord:
    """One client session: its realized request plan and lifecycle state."""

    id: int
    arrival_time: float
    admitted: bool
    plan: list[int]            # remaining tier indices, consumed front to back
    state: str = PENDING
    next_idx: int = 0
    timeout_token: int = 0     # bumped on every response; stale timeouts are ignored

    @property
    def requests_left(self) -> int:
        return len(self.plan) - self.next_idx


@dataclass(eq=False)
class RequestRecord:
    """A single request dispatched to one tier (identity semantics)."""

    session: SessionRecord
    tier: int
    dispatch_time: float
    service_start: float = -1.0
    response_time: float = -1.0  # set on completion


@dataclass(frozen=True)
class WindowMetrics:
    """Measured inputs for one SLA compliance check."""

    window_start: float
    window_end: float
    rt95: tuple[float | None, ...]   # None when a tier produced no samples
    lambda_in: float
    lambda_adm: float
    partial: bool = False            # last window shorter than check_interval


@dataclass(frozen=True)
class ComplianceReport:
    window_start: float
    window_end: float
    rt_ok: tuple[bool, ...]
    admission_ok: bool
    lambda_in: float
    lambda_adm: float
    tolerance: float
    empty: bool = False     # zero-sample marker: all flags vacuously true
    partial: bool = False


def evaluate_sla(metrics: WindowMetrics, sla: SlaSpec) -> ComplianceReport:
    """Check one observation window against the SLA.

    rt_ok[i] is True when the measured 95th percentile stays at or below the
    tier limit (vacuously True when the tier had no samples). admission_ok
    checks lambda_adm >= min(lambda_in, lambda_min) up to one session of
    counting slack over the window span.
    """
    span = metrics.window_end - metrics.window_start
    tolerance = 1.0 / span if span > 0 else 0.0
    empty = all(r is None for r in metrics.rt95) and metrics.lambda_in == 0

    rt_ok = tuple(
        True if r is None else r <= sla.rt_limits[i]
        for i, r in enumerate(metrics.rt95)
    )
    required = min(metrics.lambda_in, sla.lambda_min)
    admission_ok = metrics.lambda_adm >= required - tolerance
    if empty:
        rt_ok = tuple(True for _ in metrics.rt95)
        admission_ok = True
    return ComplianceReport(
        window_start=metrics.window_start,
        window_end=metrics.window_end,
        rt_ok=rt_ok,
        admission_ok=admission_ok,
        lambda_in=metrics.lambda_in,
        lambda_adm=metrics.lambda_adm,
        tolerance=tolerance,
        empty=empty,
        partial=metrics.partial,
    )
