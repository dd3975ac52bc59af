"""Self-learning measurement subsystem.

Holds the sliding observation window over recently admitted sessions, the
incremental regressogram that learns the admitted-rate -> response-time
curve per tier (slice barycenters, reliability filtering, permanent
monotonic aggregation, linear interpolation and inversion), and the
admitted-rate variance tracker used by change detection.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field


def percentile_95(samples: list[float]) -> float:
    """Nearest-rank 95th percentile: the ceil(0.95 * n)-th order statistic."""
    n = len(samples)
    if n == 0:
        raise ValueError("no samples")
    rank = math.ceil(0.95 * n)
    return sorted(samples)[rank - 1]


@dataclass
class WindowStats:
    """Output of one update_stats pass over the observation window."""

    lambda_in: float
    lambda_adm: float
    rt95: list[float | None]
    n_sessions: int
    n_samples: int

    @property
    def has_samples(self) -> bool:
        return self.n_samples > 0


class _Entry:
    __slots__ = ("sid", "admit_time", "samples")

    def __init__(self, sid: int, admit_time: float, n_tiers: int):
        self.sid = sid
        self.admit_time = admit_time
        self.samples: list[list[float]] = [[] for _ in range(n_tiers)]


class ObservationWindow:
    """Ring over the last min(floor(lambda_in * t), floor(lambda_star * T_AC))
    admitted sessions, plus the arrival log needed for rate estimates.

    `t` is measured from `origin` (cycle start in normal mode, mode entry in
    flash-crowd mode); `lambda_in` is the previous interval's measured value.
    Eviction is permanent: response samples for evicted sessions are dropped
    and counted in `dropped_samples`.
    """

    def __init__(self, n_tiers: int, lambda_in_bootstrap: float, t_ac: float):
        self.n_tiers = n_tiers
        self.lambda_in_prev = lambda_in_bootstrap
        self.lambda_star = lambda_in_bootstrap
        self.t_ac = t_ac
        self.origin = 0.0
        self.arrivals: deque[float] = deque()
        self.entries: deque[_Entry] = deque()
        self.by_sid: dict[int, _Entry] = {}
        self.dropped_samples = 0

    def note_arrival(self, t: float) -> None:
        self.arrivals.append(t)

    def note_admission(self, t: float, sid: int) -> None:
        entry = _Entry(sid, t, self.n_tiers)
        self.entries.append(entry)
        self.by_sid[sid] = entry
        self._trim(t)

    def note_response(self, sid: int, tier: int, rt: float) -> None:
        entry = self.by_sid.get(sid)
        if entry is None:
            self.dropped_samples += 1
            return
        entry.samples[tier].append(rt)

    def target_size(self, now: float) -> int:
        t = max(now - self.origin, 0.0)
        cap_t = math.floor(self.lambda_in_prev * t)
        cap_cycle = math.floor(self.lambda_star * self.t_ac)
        return max(1, min(cap_t, cap_cycle))

    def _trim(self, now: float) -> None:
        target = self.target_size(now)
        while len(self.entries) > target:
            gone = self.entries.popleft()
            del self.by_sid[gone.sid]
        if self.entries:
            cutoff = self.entries[0].admit_time
            while self.arrivals and self.arrivals[0] < cutoff:
                self.arrivals.popleft()

    def update_stats(self, now: float,
                     overdue: list[list[float]] | None = None) -> WindowStats:
        """Rates and per-tier nearest-rank 95th percentiles over the window.

        `overdue` optionally carries, per tier, ages of requests that are
        still outstanding past the tier's response-time limit. Each age is
        a lower bound on the eventual response time, so counting it keeps
        the percentile honest when a backlog delays completions beyond the
        window's own span (with completions alone the statistic would go
        silent exactly when the system is most overloaded).
        """
        self._trim(now)
        pend = overdue if overdue is not None else [[] for _ in range(self.n_tiers)]
        if not self.entries:
            rt95 = [percentile_95(p) if p else None for p in pend]
            return WindowStats(0.0, 0.0, rt95, 0, sum(len(p) for p in pend))
        span = now - self.entries[0].admit_time
        if span <= 0:
            return WindowStats(0.0, 0.0, [None] * self.n_tiers, len(self.entries), 0)
        start = self.entries[0].admit_time
        n_arr = sum(1 for t in self.arrivals if t >= start)
        lambda_in = n_arr / span
        lambda_adm = len(self.entries) / span
        rt95: list[float | None] = []
        n_samples = 0
        for i in range(self.n_tiers):
            tier_samples: list[float] = list(pend[i])
            for e in self.entries:
                tier_samples.extend(e.samples[i])
            n_samples += len(tier_samples)
            rt95.append(percentile_95(tier_samples) if tier_samples else None)
        return WindowStats(lambda_in, lambda_adm, rt95, len(self.entries), n_samples)


class Slice:
    """One interval [lo, hi) of the admitted-rate axis with incremental
    sufficient statistics of the points that fell into it."""

    __slots__ = ("lo", "hi", "m", "sum_l", "sum_rt", "sum_rt2")

    def __init__(self, lo: float, hi: float):
        self.lo = lo
        self.hi = hi
        self.m = 0
        self.sum_l = 0.0
        self.sum_rt = 0.0
        self.sum_rt2 = 0.0

    def add(self, lam: float, rt: float) -> None:
        self.m += 1
        self.sum_l += lam
        self.sum_rt += rt
        self.sum_rt2 += rt * rt

    def absorb(self, other: "Slice") -> None:
        self.lo = min(self.lo, other.lo)
        self.hi = max(self.hi, other.hi)
        self.m += other.m
        self.sum_l += other.sum_l
        self.sum_rt += other.sum_rt
        self.sum_rt2 += other.sum_rt2

    @property
    def barycenter(self) -> tuple[float, float]:
        return self.sum_l / self.m, self.sum_rt / self.m

    def rt_sd(self) -> float:
        """Sample standard deviation (n-1) of the RT coordinate; 0 for m < 2."""
        if self.m < 2:
            return 0.0
        mean = self.sum_rt / self.m
        var = (self.sum_rt2 - self.m * mean * mean) / (self.m - 1)
        return math.sqrt(max(var, 0.0))

    def reliable(self, max_rel_se: float = 0.20) -> bool:
        """Relative standard error of the RT mean at or below the cutoff.

        A single sample carries no spread information (the sample standard
        deviation needs m >= 2), so it cannot pass the filter.
        """
        if self.m < 2:
            return False
        mean = self.sum_rt / self.m
        se = self.rt_sd() / math.sqrt(self.m)
        if mean <= 0:
            return se == 0.0
        return se / mean <= max_rel_se


class TierCurve:
    """Regressogram estimate of the admitted-rate -> RT95 curve for one tier.

    Slices start on the canonical grid of width `slice_width`; merging
    (triggered by monotonicity violations between adjacent reliable
    barycenters) unions intervals permanently, so later inserts land in the
    merged interval. The benchmark anchor (0, anchor_rt) is the left
    boundary knot of the interpolation.
    """

    def __init__(self, anchor_rt: float, slice_width: float):
        if slice_width <= 0:
            raise ValueError("slice_width must be > 0")
        self.anchor_rt = anchor_rt
        self.width = slice_width
        self.slices: list[Slice] = []   # sorted by lo, disjoint

    def _covering(self, lam: float) -> Slice:
        for s in self.slices:
            if s.lo <= lam < s.hi:
                return s
        k = math.floor(lam / self.width)
        s = Slice(k * self.width, (k + 1) * self.width)
        self.slices.append(s)
        self.slices.sort(key=lambda x: x.lo)
        return s

    def insert(self, lam: float, rt: float) -> None:
        if lam < 0 or rt < 0:
            raise ValueError("curve points must be non-negative")
        self._covering(lam).add(lam, rt)

    def aggregate(self) -> None:
        """Merge adjacent reliable barycenters that violate RT monotonicity.

        Unreliable slices lying between the two merged ones are absorbed so
        merged intervals stay contiguous. Repeats until the reliable list is
        strictly increasing in both coordinates.
        """
        while True:
            reliable_idx = [i for i, s in enumerate(self.slices) if s.m and s.reliable()]
            merged = False
            for a, b in zip(reliable_idx, reliable_idx[1:]):
                if self.slices[b].barycenter[1] <= self.slices[a].barycenter[1]:
                    keep = self.slices[a]
                    for s in self.slices[a + 1:b + 1]:
                        keep.absorb(s)
                    del self.slices[a + 1:b + 1]
                    merged = True
                    break
            if not merged:
                return

    def barycenters(self) -> list[tuple[float, float]]:
        """Reliable barycenters ordered by the rate coordinate."""
        return [s.barycenter for s in self.slices if s.m and s.reliable()]

    def knots(self) -> list[tuple[float, float]]:
        """Interpolation knots: the anchor plus the reliable barycenters.

        The anchor is dropped when the first barycenter would break strict
        monotonicity against it (measured RT at low rate below the idle
        benchmark).
        """
        points = self.barycenters()
        if not points:
            return [(0.0, self.anchor_rt)]
        first_lam, first_rt = points[0]
        if first_lam > 0 and first_rt > self.anchor_rt:
            return [(0.0, self.anchor_rt)] + points
        return points

    def eval(self, lam: float) -> float:
        """Piecewise-linear interpolation; the last segment extrapolates."""
        pts = self.knots()
        if len(pts) == 1:
            return pts[0][1]
        if lam <= pts[0][0]:
            x0, y0 = pts[0]
            x1, y1 = pts[1]
            return y0 + (y1 - y0) * (lam - x0) / (x1 - x0)
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if lam <= x1:
                return y0 + (y1 - y0) * (lam - x0) / (x1 - x0)
        x0, y0 = pts[-2]
        x1, y1 = pts[-1]
        return y1 + (y1 - y0) * (lam - x1) / (x1 - x0)

    def invert(self, rt_target: float) -> float:
        """Smallest rate at which the interpolated curve reaches rt_target.

        Returns 0 when the target sits below the left knot (the tier cannot
        meet the limit even when idle) and +inf when the curve stays flat
        below the target (the tier imposes no constraint).
        """
        pts = self.knots()
        if rt_target < pts[0][1]:
            return 0.0
        if len(pts) == 1:
            return pts[0][0] if rt_target == pts[0][1] else math.inf
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if y0 <= rt_target <= y1:
                if y1 == y0:
                    return x0
                return x0 + (x1 - x0) * (rt_target - y0) / (y1 - y0)
        x0, y0 = pts[-2]
        x1, y1 = pts[-1]
        slope = (y1 - y0) / (x1 - x0)
        if slope <= 0:
            return math.inf
        return x1 + (rt_target - y1) / slope


class RateVariance:
    """Welford tracker of admitted-rate samples taken while lambda_in exceeds
    the current rate limit; sample standard deviation, 0 below 2 samples."""

    __slots__ = ("n", "mean", "m2")

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def push(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def sigma(self) -> float:
        if self.n < 2:
            return 0.0
        return math.sqrt(self.m2 / (self.n - 1))


class PeriodWindow:
    """Plain per-period sample window used by the baseline policies."""

    def __init__(self, n_tiers: int, period: float):
        self.n_tiers = n_tiers
        self.period = period
        self.samples: list[deque[tuple[float, float]]] = [deque() for _ in range(n_tiers)]

    def note_response(self, tier: int, t: float, rt: float) -> None:
        self.samples[tier].append((t, rt))

    def rt95(self, now: float) -> list[float | None]:
        out: list[float | None] = []
        cutoff = now - self.period
        for dq in self.samples:
            while dq and dq[0][0] < cutoff:
                dq.popleft()
            out.append(percentile_95([rt for _, rt in dq]) if dq else None)
        return out


def dump_curves(curves: list[TierCurve]) -> str:
    """Plain-text knot table (tier, rate, rt95) for plotting curve snapshots."""
    lines = ["tier\tlambda\trt95"]
    for i, curve in enumerate(curves):
        for lam, rt in curve.knots():
            lines.append(f"{i + 1}\t{lam:.6f}\t{rt:.6f}")
    return "\n".join(lines) + "\n"
