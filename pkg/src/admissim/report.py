"""Turns raw run logs into the delimited outputs: the time-series table,
the run summary, per-policy comparison rows and sweep rows.

Response-time metrics on the report path are server-side: completions of
abandoned sessions are included, so overload episodes show response times
beyond the client timeout.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left, bisect_right

from .engine import RunResult
from .monitor import percentile_95
from .scenario import Scenario

SERIES_HEADER_BASE = ["time", "lambda_in", "lambda_adm", "p", "lambda_star"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return f"{value:.10g}"
    return str(value)


def series_header(n_tiers: int) -> list[str]:
    return (
        SERIES_HEADER_BASE
        + [f"rt95_tier{i + 1}" for i in range(n_tiers)]
        + ["mode", "abandon_rate"]
    )


def build_series(result: RunResult, scenario: Scenario) -> list[list]:
    """One row per sampling interval over [0, horizon]."""
    dt = scenario.sample_interval
    horizon = scenario.horizon
    n_tiers = result.n_tiers
    comp_times = [c[0] for c in result.completions]
    log = result.policy_log
    log_times = [e[0] for e in log]

    rows = []
    n_buckets = int(math.ceil(horizon / dt - 1e-9))
    ai = bi = ci = di = 0
    arr, adm, abd = result.arrival_times, result.admit_times, result.abandon_times
    for k in range(n_buckets):
        start, end = k * dt, min((k + 1) * dt, horizon)
        span = end - start
        a2 = bisect_right(arr, end)
        b2 = bisect_right(adm, end)
        d2 = bisect_right(abd, end)
        c2 = bisect_right(comp_times, end)
        lam_in = (a2 - ai) / span
        lam_adm = (b2 - bi) / span
        abandon_rate = (d2 - di) / span
        per_tier: list[list[float]] = [[] for _ in range(n_tiers)]
        for i in range(ci, c2):
            _, tier, rt, _, _ = result.completions[i]
            per_tier[tier].append(rt)
        rt95 = [percentile_95(s) if s else None for s in per_tier]
        # Policy state is a step function of the emitted change log.
        li = bisect_right(log_times, end) - 1
        if li >= 0:
            _, p, lam_star, mode = log[li]
        else:
            p, lam_star, mode = 1.0, math.nan, ""
        rows.append(
            [end, lam_in, lam_adm, p, lam_star] + rt95 + [mode, abandon_rate]
        )
        ai, bi, ci, di = a2, b2, c2, d2
    return rows


def window_rt95_series(
    result: RunResult, start: float, end: float, width: float, tier: int
) -> list[float | None]:
    """Nearest-rank RT95 of one tier over consecutive windows of `width`."""
    buckets: list[list[float]] = [[] for _ in range(max(int(math.ceil((end - start) / width)), 0))]
    if not buckets:
        return []
    for t, tr, rt, _, _ in result.completions:
        if tr != tier or not start <= t < end:
            continue
        idx = int((t - start) / width)
        if idx < len(buckets):
            buckets[idx].append(rt)
    return [percentile_95(b) if b else None for b in buckets]


def _time_weighted_mean(log, idx, start, end):
    """Mean of one policy-log field (selected by idx) over [start, end]."""
    if not log or end <= start:
        return math.nan
    total = 0.0
    weight = 0.0
    # Value holding at `start`:
    cur = None
    for entry in log:
        if entry[0] <= start:
            cur = entry[idx]
        else:
            break
    t_prev = start
    for entry in log:
        t = entry[0]
        if t <= start:
            continue
        if t >= end:
            break
        if cur is not None and not (isinstance(cur, float) and math.isnan(cur)):
            total += cur * (t - t_prev)
            weight += t - t_prev
        cur = entry[idx]
        t_prev = t
    if cur is not None and not (isinstance(cur, float) and math.isnan(cur)):
        total += cur * (end - t_prev)
        weight += end - t_prev
    return total / weight if weight > 0 else math.nan


def cv(values: list[float]) -> float:
    """Coefficient of variation; nan for fewer than 2 values or zero mean."""
    vals = [v for v in values if v is not None]
    if len(vals) < 2:
        return math.nan
    mean = sum(vals) / len(vals)
    if mean == 0:
        return math.nan
    var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return math.sqrt(var) / mean


def build_summary(result: RunResult, scenario: Scenario, policy_name: str) -> dict:
    """Post-warmup summary metrics, deterministic key order."""
    warmup = scenario.effective_warmup(policy_name)
    horizon = scenario.horizon
    span = horizon - warmup
    n_tiers = result.n_tiers

    def count_after(times):
        return len(times) - bisect_left(times, warmup)

    arrivals = count_after(result.arrival_times)
    admitted = count_after(result.admit_times)
    rejected = count_after(result.reject_times)
    abandoned = count_after(result.abandon_times)

    per_tier: list[list[float]] = [[] for _ in range(n_tiers)]
    completed_requests = 0
    for t, tier, rt, _, _ in result.completions:
        if t >= warmup:
            per_tier[tier].append(rt)
            completed_requests += 1

    period = scenario.control_period(policy_name)
    summary: dict = {
        "policy": policy_name,
        "seed": scenario.seed,
        "horizon": horizon,
        "warmup": warmup,
        "arrivals_total": result.arrivals,
        "admitted_total": result.admitted,
        "rejected_total": result.rejected,
        "completed_sessions_total": result.completed_sessions,
        "abandoned_sessions_total": result.abandoned_sessions,
        "lambda_in_mean": arrivals / span if span > 0 else math.nan,
        "lambda_adm_mean": admitted / span if span > 0 else math.nan,
        "rejection_rate": rejected / arrivals if arrivals else 0.0,
        "abandonment_rate": abandoned / span if span > 0 else math.nan,
        "throughput_requests": completed_requests / span if span > 0 else math.nan,
        "mean_p": _time_weighted_mean(result.policy_log, 1, warmup, horizon),
        "mean_lambda_star": _time_weighted_mean(result.policy_log, 2, warmup, horizon),
    }
    violated_windows = 0
    total_windows = 0
    for i in range(n_tiers):
        samples = per_tier[i]
        summary[f"rt_mean_tier{i + 1}"] = (
            sum(samples) / len(samples) if samples else math.nan
        )
        summary[f"rt95_tier{i + 1}"] = percentile_95(samples) if samples else math.nan
        windows = window_rt95_series(result, warmup, horizon, period, i)
        summary[f"cv_rt95_tier{i + 1}"] = cv([w for w in windows if w is not None])
        if i == 0:
            total_windows = len(windows)
            violated = [False] * len(windows)
        for k, w in enumerate(windows):
            if w is not None and w > scenario.sla.rt_limits[i]:
                violated[k] = True
    violated_windows = sum(violated) if total_windows else 0
    summary["control_windows"] = total_windows
    summary["sla_violation_fraction"] = (
        violated_windows / total_windows if total_windows else 0.0
    )
    summary["compliance_failures"] = sum(
        1
        for rep in result.compliance
        if rep.window_start >= warmup and not (all(rep.rt_ok) and rep.admission_ok)
    )
    summary["dropped_window_samples"] = result.dropped_window_samples
    return summary


# -- writers -------------------------------------------------------------


def write_series_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_summary(path, summary: dict, config: dict) -> None:
    with open(path, "w") as fh:
        fh.write("# admissim summary\n")
        fh.write("# config = " + json.dumps(config, sort_keys=True) + "\n")
        for key, value in summary.items():
            fh.write(f"{key} = {_fmt(value)}\n")


def write_table_csv(path, header: list[str], rows: list[list]) -> None:
    write_series_csv(path, header, rows)


def read_summary(path) -> dict:
    """Parse a summary file back into a dict of floats/strings (tests, compare)."""
    out: dict = {}
    for line in open(path):
        if line.startswith("#") or "=" not in line:
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            out[key] = float(value)
        except ValueError:
            out[key] = value
    return out
