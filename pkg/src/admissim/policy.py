"""Admission-control strategies behind a common per-arrival decision interface.

* AdaptivePolicy: probabilistic admission driven by an online-learned
  rate -> RT95 curve, with error-driven rate-limit updates, change detection
  and a per-arrival flash-crowd mode. The `flash_crowd` flag toggles the
  change-detection machinery ("base" variant when off).
* ThresholdPolicy: periodic on/off control against per-tier RT95 thresholds.
* ProbabilisticPolicy: periodic piecewise-linear admission probability
  between a low and a high RT95 threshold.
* AlwaysAdmitPolicy: no control; used for oracle and capacity runs.

Only decisions about *new* sessions are made here; requests of already
admitted sessions are never refused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ClusterSpec, SlaSpec
from .monitor import (
    ObservationWindow,
    PeriodWindow,
    RateVariance,
    TierCurve,
    percentile_95,
)
from .traffic import draw_exponential

NORMAL = "normal"
FLASH_CROWD = "flash_crowd"


def benchmark_idle(cluster: ClusterSpec, rng, samples_per_tier: int = 1000) -> list[float]:
    """Idle-state 95th percentile of response time per tier.

    Requests are issued one at a time, so no queueing occurs and response
    time equals service time.
    """
    bench = []
    for tier in cluster.tiers:
        draws = [draw_exponential(rng, tier.mean_service_time) for _ in range(samples_per_tier)]
        bench.append(percentile_95(draws))
    return bench


def pac_probability(r: float | None, rt_low: float, rt_high: float) -> float:
    """Piecewise-linear per-tier admission probability from the measured RT95."""
    if r is None or r <= rt_low:
        return 1.0
    if r <= rt_high:
        return (rt_high - r) / (rt_high - rt_low)
    return 0.0


class Policy:
    """Decision interface shared by all strategies.

    The engine wires `schedule_tick(delay, token)` and `emit_state(now)`
    before the run starts and routes arrivals / response samples here.
    """

    name = "policy"
    control_period: float | None = None

    def __init__(self):
        self.schedule_tick = lambda delay, token: None
        self.emit_state = lambda now: None
        # Per-tier ages of requests still outstanding past the tier's RT
        # limit; the engine wires this so the monitor can see a backlog
        # before any of its completions arrive.
        self.overdue_ages = lambda now: None

    def start(self, now: float) -> None:
        if self.control_period is not None:
            self.schedule_tick(self.control_period, 0)
        self.emit_state(now)

    def on_session_arrival(self, now: float, sid: int) -> bool:
        raise NotImplementedError

    def on_control_tick(self, now: float, token: int) -> None:
        pass

    def note_response(self, now: float, sid: int, tier: int, rt: float) -> None:
        pass

    # Snapshot fields for the metric series.
    @property
    def p(self) -> float:
        return 1.0

    @property
    def lambda_star(self) -> float | None:
        return None

    @property
    def mode(self) -> str:
        return ""


@dataclass(frozen=True)
class AdaptiveConfig:
    t_ac: float = 40.0
    k_sigma: float = 3.0
    l_lambda: float | None = None        # default: sla.lambda_min / 10
    flash_crowd: bool = True
    bench_samples: int = 1000

    def slice_width(self, sla: SlaSpec) -> float:
        if self.l_lambda is not None:
            return self.l_lambda
        return max(sla.lambda_min / 10.0, 1e-6)


class AdaptivePolicy(Policy):
    """Self-tuning admission control around an adaptive rate limit.

    Normal mode: admission probability fixed within each control cycle of
    length t_ac; at the cycle end, window statistics are folded into the
    per-tier curves, the rate limit is re-derived on under/over-estimation
    evidence, and p = min(1, limit / forecast arrival rate).

    Flash-crowd mode (entered when the change detector fires): statistics
    and p are recomputed on every arrival with the rate limit frozen; back
    to normal once the instantaneous admitted rate falls below the limit.
    """

    name = "adaptive"

    def __init__(self, cfg: AdaptiveConfig, sla: SlaSpec, bench_rts: list[float], rng):
        super().__init__()
        self.cfg = cfg
        self.sla = sla
        self.rng = rng
        k = len(sla.rt_limits)
        self._lambda_star = sla.lambda_min
        self._p = 1.0
        self._mode = NORMAL
        self.n = 0                      # iteration counter
        self.N = 0                      # sessions admitted this cycle
        self.cycle_start = 0.0
        self.window = ObservationWindow(k, sla.lambda_min, cfg.t_ac)
        width = cfg.slice_width(sla)
        self.curves = [TierCurve(bench_rts[i], width) for i in range(k)]
        self.rate_var = RateVariance()
        self.tick_token = 0
        self.mode_switches = 0

    @property
    def control_period(self) -> float:  # type: ignore[override]
        return self.cfg.t_ac

    @property
    def p(self) -> float:
        return self._p

    @property
    def lambda_star(self) -> float:
        return self._lambda_star

    @property
    def mode(self) -> str:
        return self._mode

    def note_response(self, now: float, sid: int, tier: int, rt: float) -> None:
        self.window.note_response(sid, tier, rt)

    def on_session_arrival(self, now: float, sid: int) -> bool:
        self.window.note_arrival(now)
        if self._mode == FLASH_CROWD:
            return self._flash_arrival(now, sid)
        admit = self.rng.random() < self._p
        if admit:
            self.N += 1
            self.window.note_admission(now, sid)
        if self.cfg.flash_crowd and self.change_detection(now):
            self._mode = FLASH_CROWD
            self.mode_switches += 1
            # The episode gets its own admitted count and clock: the exit
            # test compares the episode's instantaneous admitted rate
            # against the limit.
            self.N = 0
            self.cycle_start = now
            self.window.origin = now
            self.tick_token += 1        # suppress the pending normal-mode tick
            self.emit_state(now)
        return admit

    def _flash_arrival(self, now: float, sid: int) -> bool:
        stats = self.window.update_stats(now, self.overdue_ages(now))
        self.n += 1
        self._update_probability(stats, update_limit=False)
        admit = self.rng.random() < self._p
        if admit:
            self.N += 1
            self.window.note_admission(now, sid)
        self.window.lambda_in_prev = stats.lambda_in
        t = now - self.cycle_start
        # t == 0 right at mode entry: rate undefined, decision deferred.
        lam_ist = self.N / t if t > 0 else math.inf
        if t > 0 and lam_ist < self._lambda_star:
            self._enter_normal(now)
        self.emit_state(now)
        return admit

    def _enter_normal(self, now: float) -> None:
        self._mode = NORMAL
        self.mode_switches += 1
        self.N = 0
        self.cycle_start = now
        self.window.origin = now
        self.tick_token += 1
        self.schedule_tick(self.cfg.t_ac, self.tick_token)

    def change_detection(self, now: float) -> bool:
        """Two-conjunct detector: cycle admission count above expectation AND
        current admitted rate above the limit by k standard deviations."""
        t = now - self.cycle_start
        if t <= 0:
            return False
        if self.N <= self._lambda_star * self.cfg.t_ac:
            return False
        return self.N / t > self._lambda_star + self.cfg.k_sigma * self.rate_var.sigma()

    def on_control_tick(self, now: float, token: int) -> None:
        if token != self.tick_token or self._mode != NORMAL:
            return
        stats = self.window.update_stats(now, self.overdue_ages(now))
        if stats.lambda_in > self._lambda_star:
            self.rate_var.push(stats.lambda_adm)
        if stats.has_samples:
            for i, rt in enumerate(stats.rt95):
                if rt is not None:
                    self.curves[i].insert(stats.lambda_adm, rt)
                    self.curves[i].aggregate()
        self._update_probability(stats, update_limit=stats.has_samples)
        self.window.lambda_in_prev = stats.lambda_in
        self.window.lambda_star = self._lambda_star
        self.n += 1
        self.N = 0
        self.cycle_start = now
        self.window.origin = now
        self.schedule_tick(self.cfg.t_ac, self.tick_token)
        self.emit_state(now)

    def _update_probability(self, stats, update_limit: bool) -> None:
        """Error-driven rate-limit update followed by the probability formula
        p = min(1, limit / forecast); the forecast is the last measured
        arrival rate. A tier with no samples can neither witness a
        violation nor certify compliance, so it blocks the raise path."""
        limits = self.sla.rt_limits
        if update_limit:
            rt = stats.rt95
            under = stats.lambda_adm >= self._lambda_star and all(
                r is not None and r < limits[i] for i, r in enumerate(rt)
            )
            over = stats.lambda_adm <= self._lambda_star and any(
                r is not None and r > limits[i] for i, r in enumerate(rt)
            )
            if under or over:
                lam = min(self.curves[i].invert(limits[i]) for i in range(len(limits)))
                if math.isfinite(lam):
                    # The SLA also guarantees a minimum admitted rate, so
                    # the limit never drops below it; undersized capacity
                    # surfaces in the compliance reports, not here.
                    self._lambda_star = max(lam, self.sla.lambda_min)
                # +inf: no tier constrains the rate yet; keep the current limit.
        forecast = stats.lambda_in
        if self._lambda_star <= 0:
            self._p = 0.0
        elif forecast <= 0:
            self._p = 1.0
        else:
            self._p = min(1.0, self._lambda_star / forecast)


@dataclass(frozen=True)
class ThresholdConfig:
    period: float = 40.0
    rt_thresholds: tuple[float, ...] | None = None   # default: SLA limits


class ThresholdPolicy(Policy):
    """On/off control: reject all new sessions for a period whenever any
    tier's RT95 exceeded its threshold at the last evaluation."""

    name = "threshold"

    def __init__(self, cfg: ThresholdConfig, sla: SlaSpec):
        super().__init__()
        self.cfg = cfg
        self.thresholds = cfg.rt_thresholds or sla.rt_limits
        self.accepting = True
        self.pwindow = PeriodWindow(len(sla.rt_limits), cfg.period)

    @property
    def control_period(self) -> float:  # type: ignore[override]
        return self.cfg.period

    @property
    def p(self) -> float:
        return 1.0 if self.accepting else 0.0

    @property
    def mode(self) -> str:
        return "accept_all" if self.accepting else "reject_new"

    def on_session_arrival(self, now: float, sid: int) -> bool:
        return self.accepting

    def note_response(self, now: float, sid: int, tier: int, rt: float) -> None:
        self.pwindow.note_response(tier, now, rt)

    def on_control_tick(self, now: float, token: int) -> None:
        rt95 = self.pwindow.rt95(now)
        self.accepting = not any(
            r is not None and r > self.thresholds[i] for i, r in enumerate(rt95)
        )
        self.schedule_tick(self.cfg.period, token)
        self.emit_state(now)


@dataclass(frozen=True)
class ProbabilisticConfig:
    period: float = 40.0
    rt_low: float = 3.0
    rt_high: float = 5.0

    def validate(self) -> None:
        if not 0 < self.rt_low < self.rt_high:
            raise ValueError("require 0 < rt_low < rt_high")


class ProbabilisticPolicy(Policy):
    """Admission probability recomputed each period as the minimum over
    tiers of the piecewise-linear response to the measured RT95."""

    name = "probabilistic"

    def __init__(self, cfg: ProbabilisticConfig, sla: SlaSpec, rng):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.rng = rng
        self._p = 1.0
        self.pwindow = PeriodWindow(len(sla.rt_limits), cfg.period)

    @property
    def control_period(self) -> float:  # type: ignore[override]
        return self.cfg.period

    @property
    def p(self) -> float:
        return self._p

    def on_session_arrival(self, now: float, sid: int) -> bool:
        return self.rng.random() < self._p

    def note_response(self, now: float, sid: int, tier: int, rt: float) -> None:
        self.pwindow.note_response(tier, now, rt)

    def on_control_tick(self, now: float, token: int) -> None:
        rt95 = self.pwindow.rt95(now)
        self._p = min(pac_probability(r, self.cfg.rt_low, self.cfg.rt_high) for r in rt95)
        self.schedule_tick(self.cfg.period, token)
        self.emit_state(now)


class AlwaysAdmitPolicy(Policy):
    name = "always"

    def on_session_arrival(self, now: float, sid: int) -> bool:
        return True
