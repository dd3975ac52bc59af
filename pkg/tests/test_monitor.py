"""Observation window, regressogram curve, inversion and variance tracking."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from admissim.monitor import (
    ObservationWindow,
    PeriodWindow,
    RateVariance,
    Slice,
    TierCurve,
    percentile_95,
)


class TestPercentile:
    def test_nearest_rank_examples(self):
        # ceil(0.95 * 20) = 19 -> 19th order statistic.
        assert percentile_95(list(range(1, 21))) == 19
        assert percentile_95([7.0]) == 7.0
        assert percentile_95([3.0, 1.0]) == 3.0   # ceil(1.9) = 2
        with pytest.raises(ValueError):
            percentile_95([])

    @given(st.lists(st.floats(min_value=0, max_value=1e6), min_size=1, max_size=200))
    @settings(max_examples=100, deadline=None)
    def test_returns_a_sample_with_95pc_below(self, xs):
        p = percentile_95(xs)
        assert p in xs
        assert sum(1 for x in xs if x <= p) >= math.ceil(0.95 * len(xs))


class TestObservationWindow:
    def test_target_size_rule(self):
        w = ObservationWindow(n_tiers=1, lambda_in_bootstrap=8.0, t_ac=40.0)
        w.lambda_star = 4.0
        # min(floor(8 * 10), floor(4 * 40)) = min(80, 160)
        assert w.target_size(10.0) == 80
        # min(floor(8 * 30), floor(4 * 40)) = min(240, 160)
        assert w.target_size(30.0) == 160
        w.origin = 25.0
        assert w.target_size(30.0) == 40   # t measured from origin
        assert w.target_size(25.0) == 1    # never below one session

    def test_eviction_is_permanent_and_counts_drops(self):
        w = ObservationWindow(n_tiers=1, lambda_in_bootstrap=2.0, t_ac=1.0)
        for sid in range(5):
            w.note_arrival(float(sid))
            w.note_admission(float(sid), sid)
        assert len(w.entries) == 2   # floor(2 * 1) cap
        w.note_response(0, 0, 1.5)   # session 0 evicted
        assert w.dropped_samples == 1
        w.note_response(4, 0, 1.5)
        assert w.dropped_samples == 1

    def test_rates_and_percentile(self):
        w = ObservationWindow(n_tiers=2, lambda_in_bootstrap=100.0, t_ac=100.0)
        for sid in range(10):
            w.note_arrival(sid * 1.0)
            if sid % 2 == 0:
                w.note_admission(sid * 1.0, sid)
        w.note_response(0, 0, 2.0)
        w.note_response(2, 0, 4.0)
        w.note_response(2, 1, 0.5)
        stats = w.update_stats(10.0)
        assert stats.lambda_adm == pytest.approx(5 / 10.0)
        assert stats.lambda_in == pytest.approx(10 / 10.0)
        assert stats.rt95 == [4.0, 0.5]
        assert stats.n_sessions == 5
        assert stats.n_samples == 3

    def test_overdue_ages_raise_the_percentile(self):
        w = ObservationWindow(n_tiers=1, lambda_in_bootstrap=100.0, t_ac=100.0)
        w.note_arrival(0.0)
        w.note_admission(0.0, 0)
        for _ in range(10):
            w.note_response(0, 0, 1.0)
        assert w.update_stats(10.0).rt95 == [1.0]
        # 11 samples: ceil(0.95 * 11) = 11 -> the pending age is the 95p.
        stats = w.update_stats(10.0, overdue=[[9.0]])
        assert stats.rt95 == [9.0]
        assert stats.n_samples == 11

    def test_empty_window_with_overdue_still_reports(self):
        w = ObservationWindow(n_tiers=1, lambda_in_bootstrap=1.0, t_ac=1.0)
        stats = w.update_stats(5.0, overdue=[[7.0, 8.0]])
        assert stats.rt95 == [8.0]
        assert stats.n_sessions == 0


class TestSlice:
    def test_single_insert_barycenter(self):
        s = Slice(0.0, 1.0)
        s.add(2.0, 4.0)
        assert s.barycenter == (2.0, 4.0)
        assert s.m == 1

    def test_barycenter_is_arithmetic_mean(self):
        s = Slice(0.0, 4.0)
        s.add(1.0, 2.0)
        s.add(3.0, 4.0)
        assert s.barycenter == (2.0, 3.0)

    def test_merge_arithmetic_count_weighted(self):
        a = Slice(0.0, 3.0)
        for _ in range(10):
            a.add(2.0, 5.0)
        b = Slice(3.0, 5.0)
        for _ in range(30):
            b.add(4.0, 4.0)
        a.absorb(b)
        assert a.barycenter == pytest.approx((3.5, 4.25))
        assert (a.lo, a.hi) == (0.0, 5.0)
        assert a.m == 40

    def test_relative_standard_error_filter(self):
        s = Slice(0.0, 1.0)
        # mean 2, sd sqrt(2), m=2 -> se/mean = 1/2 = 50% > 20% -> unreliable.
        s.add(0.5, 1.0)
        s.add(0.5, 3.0)
        assert not s.reliable()
        # 100 identical samples: se = 0 -> reliable.
        t = Slice(0.0, 1.0)
        for _ in range(100):
            t.add(0.5, 2.0)
        assert t.reliable()

    def test_rse_boundary_exactly_20_percent(self):
        # Build sd so that (sd / sqrt(m)) / mean == 0.25 -> unreliable,
        # and a tighter slice at 0.15 -> reliable.
        for target, expect in ((0.25, False), (0.15, True)):
            s = Slice(0.0, 1.0)
            mean, m = 10.0, 4
            sd_wanted = target * mean * math.sqrt(m)
            half = sd_wanted * math.sqrt((m - 1) / m)
            for v in (mean - half, mean - half, mean + half, mean + half):
                s.add(0.5, v)
            assert s.reliable() is expect

    def test_single_sample_never_reliable(self):
        s = Slice(0.0, 1.0)
        s.add(0.5, 2.0)
        assert not s.reliable()

    def test_rt_sd_matches_numpy(self):
        s = Slice(0.0, 1.0)
        vals = [1.0, 2.5, 2.5, 4.0, 7.5]
        for v in vals:
            s.add(0.5, v)
        assert s.rt_sd() == pytest.approx(np.std(vals, ddof=1))


def filled_slice(lo, hi, lam, rt, m=10):
    s = Slice(lo, hi)
    for _ in range(m):
        s.add(lam, rt)
    return s


class TestTierCurve:
    def make(self, points, anchor=1.0, width=1.0):
        c = TierCurve(anchor_rt=anchor, slice_width=width)
        for lam, rt, m in points:
            for _ in range(m):
                c.insert(lam, rt)
        c.aggregate()
        return c

    def test_insert_lands_in_canonical_slice(self):
        c = TierCurve(anchor_rt=1.0, slice_width=0.5)
        c.insert(1.3, 2.0)
        (s,) = c.slices
        assert (s.lo, s.hi) == (1.0, 1.5)

    def test_monotonic_merge(self):
        c = self.make([(2.0, 5.0, 10), (4.0, 4.0, 30)])
        assert len(c.slices) == 1
        assert c.slices[0].barycenter == pytest.approx((3.5, 4.25))

    def test_merge_is_permanent_for_future_inserts(self):
        c = self.make([(2.0, 5.0, 10), (4.0, 4.0, 30)])
        c.insert(3.0, 9.0)   # would be a new slice on the grid, lands in the merge
        assert len(c.slices) == 1
        assert c.slices[0].m == 41

    def test_unreliable_between_merged_is_absorbed(self):
        c = TierCurve(anchor_rt=1.0, slice_width=1.0)
        for _ in range(10):
            c.insert(2.5, 5.0)
        c.insert(3.5, 100.0)           # m=1, unreliable, in between
        for _ in range(10):
            c.insert(4.5, 4.0)
        c.aggregate()
        assert len(c.slices) == 1
        assert c.slices[0].m == 21

    def test_knots_are_strictly_increasing(self):
        c = self.make([(2.0, 3.0, 10), (4.0, 2.0, 10), (6.0, 8.0, 10)])
        knots = c.knots()
        for (x0, y0), (x1, y1) in zip(knots, knots[1:]):
            assert x1 > x0 and y1 > y0

    def test_anchor_used_until_barycenters_exist(self):
        c = TierCurve(anchor_rt=2.0, slice_width=1.0)
        assert c.knots() == [(0.0, 2.0)]
        assert c.eval(5.0) == 2.0

    def test_anchor_dropped_when_contradicted(self):
        # Measured RT at low rate below the idle benchmark: anchor goes.
        c = self.make([(2.0, 0.5, 10)], anchor=1.0)
        assert c.knots() == [(2.0, 0.5)]

    def test_eval_interpolates_and_extrapolates(self):
        c = self.make([(2.0, 2.0, 10), (4.0, 4.0, 10)], anchor=1.0)
        # knots: (0,1), (2,2), (4,4)
        assert c.eval(1.0) == pytest.approx(1.5)
        assert c.eval(3.0) == pytest.approx(3.0)
        assert c.eval(6.0) == pytest.approx(6.0)   # last-segment extrapolation

    def test_invert_knot_cases(self):
        c = self.make([(2.0, 2.0, 10), (4.0, 4.0, 10)], anchor=1.0)
        assert c.invert(2.0) == pytest.approx(2.0)    # exactly at a knot
        assert c.invert(3.0) == pytest.approx(3.0)    # between knots
        assert c.invert(6.0) == pytest.approx(6.0)    # beyond: extrapolated
        assert c.invert(0.5) == 0.0                   # below the left knot

    def test_invert_flat_curve_is_unconstrained(self):
        c = TierCurve(anchor_rt=1.0, slice_width=1.0)
        assert c.invert(5.0) == math.inf

    def test_incremental_equals_batch(self):
        rng = np.random.default_rng(5)
        c = TierCurve(anchor_rt=1.0, slice_width=0.7)
        pts = [(float(rng.uniform(0, 10)), float(rng.uniform(0, 20))) for _ in range(300)]
        for lam, rt in pts:
            c.insert(lam, rt)
        for s in c.slices:
            members = [(l, r) for l, r in pts if s.lo <= l < s.hi]
            assert s.m == len(members)
            bl, br = s.barycenter
            assert bl == pytest.approx(np.mean([l for l, _ in members]), rel=1e-9)
            assert br == pytest.approx(np.mean([r for _, r in members]), rel=1e-9)

    @given(st.lists(
        st.tuples(st.floats(min_value=0, max_value=20), st.floats(min_value=0, max_value=50)),
        min_size=1, max_size=120,
    ))
    @settings(max_examples=60, deadline=None)
    def test_aggregate_invariants(self, pts):
        c = TierCurve(anchor_rt=1.0, slice_width=1.5)
        for lam, rt in pts:
            c.insert(lam, rt)
        c.aggregate()
        # Slices stay sorted and disjoint; the point count is conserved.
        for a, b in zip(c.slices, c.slices[1:]):
            assert a.hi <= b.lo
        assert sum(s.m for s in c.slices) == len(pts)
        # Reliable barycenters are strictly increasing in both coordinates.
        bary = c.barycenters()
        for (x0, y0), (x1, y1) in zip(bary, bary[1:]):
            assert x1 > x0 and y1 > y0


class TestRateVariance:
    def test_matches_numpy_sample_sd(self):
        rv = RateVariance()
        xs = [4.0, 6.0, 5.0, 9.0, 2.0]
        for x in xs:
            rv.push(x)
        assert rv.sigma() == pytest.approx(np.std(xs, ddof=1))

    def test_zero_below_two_samples(self):
        rv = RateVariance()
        assert rv.sigma() == 0.0
        rv.push(3.0)
        assert rv.sigma() == 0.0


class TestPeriodWindow:
    def test_expires_old_samples(self):
        w = PeriodWindow(n_tiers=1, period=10.0)
        w.note_response(0, 0.0, 5.0)
        w.note_response(0, 8.0, 1.0)
        assert w.rt95(9.0) == [5.0]
        assert w.rt95(15.0) == [1.0]
        assert w.rt95(30.0) == [None]
