"""Deterministic discrete-event loop.

Events are ordered by (fire_time, insertion sequence), so two runs with the
same seed and scenario replay identical traces. Each random purpose draws
from its own seeded stream; admission coin flips never perturb arrival
times or service durations, which keeps traffic traces comparable across
policies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from heapq import heappop, heappush

import numpy as np

from .core import (
    ABANDONED,
    COMPLETED,
    THINKING,
    WAITING,
    ComplianceReport,
    InternalConsistencyError,
    RequestRecord,
    SessionRecord,
    WindowMetrics,
    evaluate_sla,
)
from .cluster import Tier
from .monitor import percentile_95
from .traffic import build_plan, draw_think_time, next_arrival

# Event kinds.
SESSION_ARRIVAL = 0
SERVICE_COMPLETION = 1
THINK_EXPIRY = 2
CLIENT_TIMEOUT = 3
CONTROL_TICK = 4
SLA_TICK = 5
PROFILE_CHANGE = 6


class RngStreams:
    """Independent per-purpose random streams derived from one master seed."""

    def __init__(self, seed: int, n_tiers: int):
        root = np.random.SeedSequence(seed)
        children = root.spawn(5 + n_tiers)
        self.arrivals = np.random.default_rng(children[0])
        self.session_plan = np.random.default_rng(children[1])
        self.think = np.random.default_rng(children[2])
        self.admission = np.random.default_rng(children[3])
        self.bench = np.random.default_rng(children[4])
        self.service = [np.random.default_rng(c) for c in children[5:]]


@dataclass
class RunResult:
    """Raw event logs and end-of-run metrics; the report module turns these
    into the time series and summary tables."""

    horizon: float
    n_tiers: int
    arrivals: int = 0
    admitted: int = 0
    rejected: int = 0
    completed_sessions: int = 0
    abandoned_sessions: int = 0
    arrival_times: list = field(default_factory=list)
    admit_times: list = field(default_factory=list)
    reject_times: list = field(default_factory=list)
    abandon_times: list = field(default_factory=list)
    # (time, tier, response_time, wait, session_abandoned)
    completions: list = field(default_factory=list)
    # (time, p, lambda_star_or_nan, mode)
    policy_log: list = field(default_factory=list)
    compliance: list[ComplianceReport] = field(default_factory=list)
    tier_mean_in_system: list = field(default_factory=list)
    tier_utilization: list = field(default_factory=list)
    tier_completions: list = field(default_factory=list)
    dropped_window_samples: int = 0


class Simulator:
    """Single-threaded event loop over one scenario and one policy instance."""

    def __init__(self, scenario, policy, streams: RngStreams | None = None):
        self.scenario = scenario
        self.policy = policy
        self.streams = streams or RngStreams(scenario.seed, scenario.cluster.n_tiers)
        self.tiers = [Tier(i, spec) for i, spec in enumerate(scenario.cluster.tiers)]
        self.clock = 0.0
        self._heap: list = []
        self._seq = 0
        self.result = RunResult(horizon=scenario.horizon, n_tiers=scenario.cluster.n_tiers)
        # SLA check bookkeeping: log indices consumed by the previous check.
        self._sla_last_t = 0.0
        self._sla_arr_idx = 0
        self._sla_adm_idx = 0
        self._sla_comp_idx = 0
        policy.schedule_tick = self._schedule_tick
        policy.emit_state = self._emit_state
        policy.overdue_ages = self._overdue_ages

    # -- scheduling ---------------------------------------------------------

    def _push(self, t: float, kind: int, data) -> None:
        if t < self.clock:
            raise InternalConsistencyError(
                f"event kind {kind} scheduled at {t} before clock {self.clock}"
            )
        heappush(self._heap, (t, self._seq, kind, data))
        self._seq += 1

    def _schedule_tick(self, delay: float, token: int) -> None:
        self._push(self.clock + delay, CONTROL_TICK, token)

    def _overdue_ages(self, now: float) -> list[list[float]]:
        limits = self.scenario.sla.rt_limits
        out = []
        for i, tier in enumerate(self.tiers):
            out.append([now - r.dispatch_time for r in tier.in_flight
                        if now - r.dispatch_time > limits[i]])
        return out

    def _emit_state(self, now: float) -> None:
        pol = self.policy
        lam = pol.lambda_star
        self.result.policy_log.append(
            (now, pol.p, math.nan if lam is None else lam, pol.mode)
        )

    # -- run ----------------------------------------------------------------

    def run(self) -> RunResult:
        sc = self.scenario
        if sc.horizon <= 0:
            raise ValueError("horizon must be > 0")
        self.policy.start(0.0)
        self._push(sc.sla.check_interval, SLA_TICK, None)
        for seg in sc.profile.segments[1:]:
            if seg.start <= sc.horizon:
                self._push(seg.start, PROFILE_CHANGE, None)
        first = next_arrival(0.0, sc.profile, self.streams.arrivals)
        if math.isfinite(first):
            self._push(first, SESSION_ARRIVAL, None)

        heap = self._heap
        horizon = sc.horizon
        while heap:
            t, _, kind, data = heappop(heap)
            if t > horizon:
                break
            if t < self.clock:
                raise InternalConsistencyError("event heap yielded a past event")
            self.clock = t
            if kind == SERVICE_COMPLETION:
                self._on_completion(data, t)
            elif kind == SESSION_ARRIVAL:
                self._on_arrival(t)
            elif kind == THINK_EXPIRY:
                self._on_think(data, t)
            elif kind == CLIENT_TIMEOUT:
                self._on_timeout(data, t)
            elif kind == CONTROL_TICK:
                self.policy.on_control_tick(t, data)
            elif kind == SLA_TICK:
                self._on_sla_tick(t)
            # PROFILE_CHANGE needs no action: arrival generation already
            # accounts for segment boundaries at draw time.

        end = min(self.clock, horizon) if self.arrived_any() else horizon
        self._finalize(max(end, 0.0), horizon)
        return self.result

    def arrived_any(self) -> bool:
        return self.result.arrivals > 0

    def _finalize(self, end: float, horizon: float) -> None:
        res = self.result
        for tier in self.tiers:
            tier.finalize(horizon)
            res.tier_mean_in_system.append(tier.mean_in_system(horizon))
            res.tier_utilization.append(tier.utilization(horizon))
            res.tier_completions.append(tier.completions)
        if horizon > self._sla_last_t:
            self._sla_check(horizon, partial=True)
        window = getattr(self.policy, "window", None)
        if window is not None:
            res.dropped_window_samples = window.dropped_samples

    # -- handlers -----------------------------------------------------------

    def _on_arrival(self, now: float) -> None:
        sc = self.scenario
        res = self.result
        sid = res.arrivals
        res.arrivals += 1
        res.arrival_times.append(now)
        # Plans are realized before the admission decision so that the
        # session_plan stream stays aligned across policies.
        plan = build_plan(self.streams.session_plan, sc.template)
        if self.policy.on_session_arrival(now, sid):
            res.admitted += 1
            res.admit_times.append(now)
            session = SessionRecord(id=sid, arrival_time=now, admitted=True, plan=plan)
            self._issue_request(session, now)
        else:
            res.rejected += 1
            res.reject_times.append(now)
        nxt = next_arrival(now, sc.profile, self.streams.arrivals)
        if math.isfinite(nxt):
            self._push(nxt, SESSION_ARRIVAL, None)

    def _issue_request(self, session: SessionRecord, now: float) -> None:
        tier_idx = session.plan[session.next_idx]
        req = RequestRecord(session=session, tier=tier_idx, dispatch_time=now)
        session.state = WAITING
        done = self.tiers[tier_idx].dispatch(req, now, self.streams.service[tier_idx])
        if done is not None:
            self._push(done, SERVICE_COMPLETION, req)
        timeout = self.scenario.template.client_timeout
        if timeout is not None:
            self._push(now + timeout, CLIENT_TIMEOUT, (session, session.timeout_token))

    def _on_completion(self, req: RequestRecord, now: float) -> None:
        tier = self.tiers[req.tier]
        started = tier.complete(req, now, self.streams.service[req.tier])
        if started is not None:
            self._push(started[1], SERVICE_COMPLETION, started[0])
        session = req.session
        abandoned = session.state == ABANDONED
        wait = req.service_start - req.dispatch_time
        self.result.completions.append((now, req.tier, req.response_time, wait, abandoned))
        # The admission layer sits in the serving path and observes the
        # backend completion even when the client has already given up.
        # Feeding it only survivor samples would censor response times at
        # the client timeout and blind the controller in deep overload.
        self.policy.note_response(now, session.id, req.tier, req.response_time)
        if abandoned:
            return
        session.timeout_token += 1
        session.next_idx += 1
        if session.next_idx >= len(session.plan):
            session.state = COMPLETED
            self.result.completed_sessions += 1
        else:
            session.state = THINKING
            gap = draw_think_time(self.streams.think, self.scenario.template)
            self._push(now + gap, THINK_EXPIRY, session)

    def _on_think(self, session: SessionRecord, now: float) -> None:
        if session.state == THINKING:
            self._issue_request(session, now)

    def _on_timeout(self, data, now: float) -> None:
        session, token = data
        if session.state == WAITING and token == session.timeout_token:
            # The outstanding (and any queued) request still runs to
            # completion; only the client gives up.
            session.state = ABANDONED
            self.result.abandoned_sessions += 1
            self.result.abandon_times.append(now)

    def _on_sla_tick(self, now: float) -> None:
        self._sla_check(now, partial=False)
        self._push(now + self.scenario.sla.check_interval, SLA_TICK, None)

    def _sla_check(self, now: float, partial: bool) -> None:
        res = self.result
        span = now - self._sla_last_t
        if span <= 0:
            return
        n_arr = len(res.arrival_times) - self._sla_arr_idx
        n_adm = len(res.admit_times) - self._sla_adm_idx
        per_tier: list[list[float]] = [[] for _ in range(res.n_tiers)]
        for i in range(self._sla_comp_idx, len(res.completions)):
            _, tier, rt, _, abandoned = res.completions[i]
            if not abandoned:
                per_tier[tier].append(rt)
        rt95 = tuple(percentile_95(s) if s else None for s in per_tier)
        metrics = WindowMetrics(
            window_start=self._sla_last_t,
            window_end=now,
            rt95=rt95,
            lambda_in=n_arr / span,
            lambda_adm=n_adm / span,
            partial=partial,
        )
        res.compliance.append(evaluate_sla(metrics, self.scenario.sla))
        self._sla_last_t = now
        self._sla_arr_idx = len(res.arrival_times)
        self._sla_adm_idx = len(res.admit_times)
        self._sla_comp_idx = len(res.completions)
