"""Matplotlib figure rendering for the report path.

Figures are saved next to the delimited outputs; they are a convenience
view of the CSV content, never an input to anything.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _column(rows, header, name):
    idx = header.index(name)
    return [row[idx] for row in rows]


def plot_run(header, rows, scenario, out_path) -> None:
    """Stacked time-series panels: rates and limit, admission probability,
    bottleneck-tier RT95 against its SLA cap."""
    n_tiers = scenario.cluster.n_tiers
    bottleneck = max(
        range(n_tiers), key=lambda i: scenario.cluster.tiers[i].mean_service_time
    )
    t = _column(rows, header, "time")
    fig, axes = plt.subplots(3, 1, figsize=(9, 8), sharex=True)

    ax = axes[0]
    ax.plot(t, _column(rows, header, "lambda_in"), label="arrival rate", lw=1)
    ax.plot(t, _column(rows, header, "lambda_adm"), label="admitted rate", lw=1)
    lam_star = [
        v if isinstance(v, float) and not math.isnan(v) else None
        for v in _column(rows, header, "lambda_star")
    ]
    if any(v is not None for v in lam_star):
        ax.plot(t, lam_star, label="rate limit", lw=1, ls="--")
    ax.set_ylabel("sessions/s")
    ax.legend(loc="upper right", fontsize=8)

    ax = axes[1]
    ax.plot(t, _column(rows, header, "p"), lw=1, color="tab:green")
    ax.set_ylabel("admission probability")
    ax.set_ylim(-0.05, 1.05)

    ax = axes[2]
    rt = _column(rows, header, f"rt95_tier{bottleneck + 1}")
    ax.plot(t, rt, lw=1, color="tab:red", label=f"tier {bottleneck + 1} RT95")
    ax.axhline(
        scenario.sla.rt_limits[bottleneck], color="k", ls=":", lw=1, label="SLA limit"
    )
    ax.set_ylabel("seconds")
    ax.set_xlabel("time (s)")
    ax.legend(loc="upper right", fontsize=8)

    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def plot_compare(per_policy: dict, scenario, out_path) -> None:
    """Overlay of admitted rate, admission probability and bottleneck RT95
    for every policy in a comparison run. per_policy: name -> (header, rows)."""
    n_tiers = scenario.cluster.n_tiers
    bottleneck = max(
        range(n_tiers), key=lambda i: scenario.cluster.tiers[i].mean_service_time
    )
    fig, axes = plt.subplots(3, 1, figsize=(9, 8), sharex=True)
    for name, (header, rows) in per_policy.items():
        t = _column(rows, header, "time")
        axes[0].plot(t, _column(rows, header, "lambda_adm"), lw=1, label=name)
        axes[1].plot(t, _column(rows, header, "p"), lw=1, label=name)
        axes[2].plot(
            t, _column(rows, header, f"rt95_tier{bottleneck + 1}"), lw=1, label=name
        )
    axes[0].set_ylabel("admitted sessions/s")
    axes[1].set_ylabel("admission probability")
    axes[2].axhline(scenario.sla.rt_limits[bottleneck], color="k", ls=":", lw=1)
    axes[2].set_ylabel(f"tier {bottleneck + 1} RT95 (s)")
    axes[2].set_xlabel("time (s)")
    for ax in axes:
        ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def plot_curves(curves, sla, out_path) -> None:
    """Learned rate -> RT95 knots per tier with the SLA caps."""
    fig, ax = plt.subplots(figsize=(7, 5))
    for i, curve in enumerate(curves):
        pts = curve.knots()
        ax.plot(
            [p[0] for p in pts],
            [p[1] for p in pts],
            marker="o",
            ms=3,
            lw=1,
            label=f"tier {i + 1}",
        )
        ax.axhline(sla.rt_limits[i], ls=":", lw=0.8, color=f"C{i}")
    ax.set_xlabel("admitted sessions/s")
    ax.set_ylabel("RT95 (s)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def plot_sweep(param, values, summaries, metric, out_path) -> None:
    """One summary metric against the swept parameter values."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ys = [s.get(metric, math.nan) for s in summaries]
    ax.plot(values, ys, marker="o")
    ax.set_xlabel(param)
    ax.set_ylabel(metric)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
