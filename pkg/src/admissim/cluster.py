"""The K-tier server farm behind the dispatching point.

Each tier is a single FIFO queue shared by `servers` identical servers
(M/M/c shape), which keeps the Erlang-C closed form available as a test
oracle. Work is never preempted: a request that reached a server runs to
completion even if its client has abandoned.
"""

from __future__ import annotations

from collections import deque

from .core import RequestRecord, TierSpec
from .traffic import draw_exponential


class Tier:
    """Queueing state plus time-integrated occupancy metrics for one tier."""

    __slots__ = (
        "index", "spec", "queue", "busy", "in_flight",
        "_last_t", "area_in_system", "area_busy", "completions",
    )

    def __init__(self, index: int, spec: TierSpec):
        self.index = index
        self.spec = spec
        self.queue: deque[RequestRecord] = deque()
        self.busy = 0
        # Requests dispatched but not yet completed, queued or in service.
        # The dispatching point can observe their ages even before a
        # response exists, which matters under heavy backlog.
        self.in_flight: set[RequestRecord] = set()
        self._last_t = 0.0
        self.area_in_system = 0.0   # integral of (busy + queued) dt
        self.area_busy = 0.0        # integral of busy dt
        self._last_t = 0.0
        self.completions = 0

    def _advance(self, now: float) -> None:
        dt = now - self._last_t
        if dt > 0:
            self.area_in_system += dt * (self.busy + len(self.queue))
            self.area_busy += dt * self.busy
            self._last_t = now

    def in_system(self) -> int:
        return self.busy + len(self.queue)

    def dispatch(self, request: RequestRecord, now: float, rng) -> float | None:
        """Accept a request at time `now`.

        Starts service immediately when a server is free and returns the
        completion time to schedule; otherwise queues the request (FIFO) and
        returns None. The dispatch timestamp was set by the caller.
        """
        self._advance(now)
        self.in_flight.add(request)
        if self.busy < self.spec.servers:
            self.busy += 1
            request.service_start = now
            return now + draw_exponential(rng, self.spec.mean_service_time)
        self.queue.append(request)
        return None

    def complete(self, request: RequestRecord, now: float, rng) -> tuple[RequestRecord, float] | None:
        """Finish one request's service.

        Records its response time, frees the server, and starts the head of
        the queue if any; returns (next_request, completion_time) for the
        newly started request, or None.
        """
        self._advance(now)
        self.in_flight.discard(request)
        request.response_time = now - request.dispatch_time
        self.busy -= 1
        self.completions += 1
        if self.queue:
            nxt = self.queue.popleft()
            self.busy += 1
            nxt.service_start = now
            return nxt, now + draw_exponential(rng, self.spec.mean_service_time)
        return None

    def finalize(self, now: float) -> None:
        self._advance(now)

    def mean_in_system(self, horizon: float) -> float:
        return self.area_in_system / horizon if horizon > 0 else 0.0

    def utilization(self, horizon: float) -> float:
        denom = horizon * self.spec.servers
        return self.area_busy / denom if denom > 0 else 0.0
