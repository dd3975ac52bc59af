"""Tier queueing mechanics: FIFO order, bookkeeping, occupancy integrals."""

import random

import pytest

from admissim.cluster import Tier
from admissim.core import RequestRecord, SessionRecord, TierSpec


def make_request(t: float, tier: int = 0) -> RequestRecord:
    session = SessionRecord(id=0, arrival_time=t, admitted=True, plan=[tier])
    return RequestRecord(session=session, tier=tier, dispatch_time=t)


class TestDispatch:
    def test_immediate_service_when_server_free(self):
        tier = Tier(0, TierSpec(servers=2, mean_service_time=1.0))
        rng = random.Random(0)
        r = make_request(1.0)
        done = tier.dispatch(r, 1.0, rng)
        assert done is not None and done > 1.0
        assert r.service_start == 1.0
        assert tier.busy == 1
        assert r in tier.in_flight

    def test_queues_when_all_servers_busy(self):
        tier = Tier(0, TierSpec(servers=1, mean_service_time=1.0))
        rng = random.Random(0)
        first = make_request(0.0)
        tier.dispatch(first, 0.0, rng)
        second = make_request(0.5)
        assert tier.dispatch(second, 0.5, rng) is None
        assert tier.in_system() == 2
        assert second.service_start == -1.0

    def test_fifo_order(self):
        tier = Tier(0, TierSpec(servers=1, mean_service_time=1.0))
        rng = random.Random(0)
        served = make_request(0.0)
        tier.dispatch(served, 0.0, rng)
        queued = [make_request(0.1 * i) for i in range(1, 4)]
        for r in queued:
            tier.dispatch(r, r.dispatch_time, rng)
        order = []
        nxt = tier.complete(served, 2.0, rng)
        while nxt is not None:
            req, _ = nxt
            order.append(req)
            nxt = tier.complete(req, 3.0, rng)
        assert order == queued


class TestComplete:
    def test_records_response_time_and_counts(self):
        tier = Tier(0, TierSpec(servers=1, mean_service_time=1.0))
        rng = random.Random(0)
        r = make_request(2.0)
        tier.dispatch(r, 2.0, rng)
        assert tier.complete(r, 5.5, rng) is None
        assert r.response_time == pytest.approx(3.5)
        assert tier.completions == 1
        assert tier.busy == 0
        assert r not in tier.in_flight

    def test_promotes_queue_head(self):
        tier = Tier(0, TierSpec(servers=1, mean_service_time=1.0))
        rng = random.Random(0)
        a, b = make_request(0.0), make_request(0.2)
        tier.dispatch(a, 0.0, rng)
        tier.dispatch(b, 0.2, rng)
        nxt = tier.complete(a, 1.0, rng)
        assert nxt is not None
        req, done = nxt
        assert req is b and done > 1.0
        assert b.service_start == 1.0
        assert tier.busy == 1 and not tier.queue


class TestOccupancy:
    def test_time_integrals(self):
        tier = Tier(0, TierSpec(servers=1, mean_service_time=1.0))
        rng = random.Random(0)
        a, b = make_request(0.0), make_request(0.0)
        tier.dispatch(a, 0.0, rng)   # busy=1 from t=0
        tier.dispatch(b, 0.0, rng)   # queued from t=0
        tier.complete(a, 4.0, rng)   # b starts service at 4
        tier.complete(b, 10.0, rng)
        tier.finalize(10.0)
        # In system: 2 over [0,4), 1 over [4,10) -> 8 + 6 = 14.
        assert tier.area_in_system == pytest.approx(14.0)
        # Busy the whole 10 s.
        assert tier.area_busy == pytest.approx(10.0)
        assert tier.mean_in_system(10.0) == pytest.approx(1.4)
        assert tier.utilization(10.0) == pytest.approx(1.0)

    def test_idle_tier_zero_metrics(self):
        tier = Tier(0, TierSpec(servers=3, mean_service_time=1.0))
        tier.finalize(50.0)
        assert tier.mean_in_system(50.0) == 0.0
        assert tier.utilization(50.0) == 0.0

    def test_work_conservation(self):
        # Every dispatched request eventually completes; counters agree.
        tier = Tier(0, TierSpec(servers=2, mean_service_time=0.5))
        rng = random.Random(42)
        pending = []   # (completion_time, request)
        t = 0.0
        dispatched = 0
        for i in range(200):
            t += rng.expovariate(4.0)
            while pending and pending[0][0] <= t:
                done_t, req = pending.pop(0)
                nxt = tier.complete(req, done_t, rng)
                if nxt is not None:
                    pending.append((nxt[1], nxt[0]))
                    pending.sort()
            r = make_request(t)
            done = tier.dispatch(r, t, rng)
            dispatched += 1
            if done is not None:
                pending.append((done, r))
                pending.sort()
        while pending:
            done_t, req = pending.pop(0)
            nxt = tier.complete(req, done_t, rng)
            if nxt is not None:
                pending.append((nxt[1], nxt[0]))
                pending.sort()
        assert tier.completions == dispatched
        assert not tier.in_flight and not tier.queue and tier.busy == 0
