"""Session arrival generation, request plans, think times and client timeouts.

Arrivals follow a piecewise-constant-rate Poisson process. Think times are
exponential with a hard floor. Each session realizes a flat tier sequence
from a configurable phase plan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ConfigError


@dataclass(frozen=True)
class Segment:
    start: float
    rate: float  # sessions/second


@dataclass(frozen=True)
class TrafficProfile:
    """Stepwise arrival intensity; each segment holds until the next start."""

    segments: tuple[Segment, ...]

    def validate(self) -> None:
        if not self.segments:
            raise ConfigError("traffic.segments must not be empty")
        if self.segments[0].start != 0:
            raise ConfigError("traffic.segments[0].start must be 0")
        prev = -1.0
        for i, seg in enumerate(self.segments):
            if seg.start <= prev:
                raise ConfigError(f"traffic.segments[{i}].start must be strictly increasing")
            if seg.rate < 0:
                raise ConfigError(f"traffic.segments[{i}].rate must be >= 0, got {seg.rate}")
            prev = seg.start

    def segment_index(self, t: float) -> int:
        idx = 0
        for i, seg in enumerate(self.segments):
            if seg.start <= t:
                idx = i
            else:
                break
        return idx

    def rate_at(self, t: float) -> float:
        return self.segments[self.segment_index(t)].rate


@dataclass(frozen=True)
class Phase:
    tier: int                  # 0-based
    dist: str                  # "fixed" | "geometric"
    value: float               # count for fixed, mean count for geometric

    def mean_count(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class SessionTemplate:
    phases: tuple[Phase, ...]
    think_mean: float           # seconds
    think_floor: float          # seconds
    client_timeout: float | None  # seconds; None disables abandonment

    def validate(self, n_tiers: int) -> None:
        if not self.phases:
            raise ConfigError("session.phases must not be empty")
        for i, ph in enumerate(self.phases):
            if not 0 <= ph.tier < n_tiers:
                raise ConfigError(
                    f"session.phases[{i}].tier {ph.tier + 1} not in 1..{n_tiers}"
                )
            if ph.dist not in ("fixed", "geometric"):
                raise ConfigError(f"session.phases[{i}] unknown distribution {ph.dist!r}")
            if ph.dist == "fixed" and (ph.value < 1 or ph.value != int(ph.value)):
                raise ConfigError(f"session.phases[{i}] fixed count must be a positive integer")
            if ph.dist == "geometric" and ph.value < 1:
                raise ConfigError(f"session.phases[{i}] geometric mean must be >= 1")
        if self.think_floor <= 0:
            raise ConfigError("session.think_floor must be > 0")
        if self.think_mean <= 0:
            raise ConfigError("session.think_mean must be > 0")
        if self.client_timeout is not None and self.client_timeout <= 0:
            raise ConfigError("session.client_timeout must be > 0 or null")

    def mean_requests(self) -> float:
        return sum(ph.mean_count() for ph in self.phases)


def exponential_from_uniform(u: float, mean: float) -> float:
    """Inverse-CDF exponential draw; u in (0, 1]."""
    return -mean * math.log(u)


def think_time_from_uniform(u: float, mean: float, floor: float) -> float:
    """max(-ln(u) * mean, floor) with u uniform in (0, 1]."""
    return max(exponential_from_uniform(u, mean), floor)


def draw_exponential(rng, mean: float) -> float:
    """Strictly positive exponential sample with the given mean."""
    # 1 - random() lies in (0, 1], so log() never sees 0.
    return exponential_from_uniform(1.0 - rng.random(), mean)


def draw_think_time(rng, template: SessionTemplate) -> float:
    return think_time_from_uniform(1.0 - rng.random(), template.think_mean, template.think_floor)


def next_arrival(current: float, profile: TrafficProfile, rng) -> float:
    """Next arrival time of the piecewise-constant Poisson process after `current`.

    Inside a segment the gap is exponential with mean 1/rate; a gap crossing
    a segment boundary is redrawn from the boundary (memorylessness). Returns
    inf when every remaining segment has rate 0.
    """
    segs = profile.segments
    idx = profile.segment_index(current)
    t = current
    while True:
        rate = segs[idx].rate
        end = segs[idx + 1].start if idx + 1 < len(segs) else math.inf
        if rate <= 0:
            if math.isinf(end):
                return math.inf
            t = end
            idx += 1
            continue
        candidate = t + draw_exponential(rng, 1.0 / rate)
        if candidate <= end:
            return candidate
        if math.isinf(end):
            return candidate
        t = end
        idx += 1


def build_plan(rng, template: SessionTemplate) -> list[int]:
    """Realize a session's flat tier sequence from the phase plan."""
    plan: list[int] = []
    for ph in template.phases:
        if ph.dist == "fixed":
            count = int(ph.value)
        else:
            # Geometric on {1, 2, ...} with mean m  =>  p = 1/m.
            count = int(rng.geometric(1.0 / ph.value))
        plan.extend([ph.tier] * count)
    return plan
