"""Command line interface: single runs, policy comparisons and parameter
sweeps over scenario files.

Exit codes: 0 ok, 1 configuration error, 2 runtime assertion failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import simulate
from .core import ConfigError, InternalConsistencyError
from .monitor import dump_curves
from .report import (
    build_series,
    build_summary,
    series_header,
    write_series_csv,
    write_summary,
    write_table_csv,
)
from .scenario import POLICY_NAMES, SWEEP_PARAMS, load_scenario

COMPARE_COLUMNS = [
    "policy",
    "lambda_in_mean",
    "lambda_adm_mean",
    "rejection_rate",
    "abandonment_rate",
    "throughput_requests",
    "mean_p",
    "sla_violation_fraction",
]


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="admissim",
        description="Discrete-event simulation of admission control for a multi-tier web cluster.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", help="scenario file path or canned scenario name")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--horizon", type=float, default=None, help="override the horizon (s)")
        p.add_argument("--out", type=Path, default=Path("admissim-out"), help="output directory")
        p.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    run_p = sub.add_parser("run", help="run one scenario with one policy")
    common(run_p)
    run_p.add_argument("--policy", choices=POLICY_NAMES, default=None)
    run_p.add_argument(
        "--dump-curves", action="store_true",
        help="write the learned curve knots (adaptive policies only)",
    )

    cmp_p = sub.add_parser("compare", help="run several policies on identical traffic")
    common(cmp_p)
    cmp_p.add_argument(
        "--policies", required=True,
        help=f"comma-separated list (>= 2) from {','.join(POLICY_NAMES)}",
    )

    sweep_p = sub.add_parser("sweep", help="independent runs across one parameter")
    common(sweep_p)
    sweep_p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    sweep_p.add_argument("--values", required=True, help="comma-separated values")
    sweep_p.add_argument("--policy", choices=POLICY_NAMES, default=None)
    return parser


def _load(args):
    scenario = load_scenario(args.scenario)
    return scenario.with_overrides(seed=args.seed, horizon=args.horizon)


def _write_run_outputs(out: Path, scenario, policy_name, result, policy,
                       plots: bool, dump: bool) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    header = series_header(result.n_tiers)
    rows = build_series(result, scenario)
    summary = build_summary(result, scenario, policy_name)
    config = scenario.to_dict()
    config["policy"]["name"] = policy_name
    write_series_csv(out / "series.csv", header, rows)
    write_summary(out / "summary.txt", summary, config)
    curves = getattr(policy, "curves", None)
    if dump and curves is not None:
        (out / "curves.txt").write_text(dump_curves(curves))
    if plots:
        from . import plots as plotmod

        plotmod.plot_run(header, rows, scenario, out / "run.png")
        if curves is not None:
            plotmod.plot_curves(curves, scenario.sla, out / "curves.png")
    return {"header": header, "rows": rows, "summary": summary}


def cmd_run(args) -> int:
    scenario = _load(args)
    policy_name = args.policy or scenario.policy.name
    result, policy = simulate(scenario, policy_name)
    out = _write_run_outputs(
        args.out, scenario, policy_name, result, policy,
        plots=not args.no_plots, dump=args.dump_curves,
    )
    s = out["summary"]
    print(f"policy={policy_name} lambda_adm={s['lambda_adm_mean']:.4g} "
          f"rejection_rate={s['rejection_rate']:.4g} "
          f"sla_violation_fraction={s['sla_violation_fraction']:.4g}")
    print(f"wrote {args.out}/series.csv and {args.out}/summary.txt")
    return 0


def cmd_compare(args) -> int:
    scenario = _load(args)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    if len(policies) < 2:
        raise ConfigError("compare needs at least 2 policies")
    for p in policies:
        if p not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {p!r}; choose from {POLICY_NAMES}")
    args.out.mkdir(parents=True, exist_ok=True)
    n_tiers = scenario.cluster.n_tiers
    columns = COMPARE_COLUMNS + [f"rt95_tier{i + 1}" for i in range(n_tiers)] + [
        f"cv_rt95_tier{i + 1}" for i in range(n_tiers)
    ]
    table = []
    per_policy = {}
    for name in policies:
        result, policy = simulate(scenario, name)
        sub = _write_run_outputs(
            args.out / name, scenario, name, result, policy,
            plots=False, dump=False,
        )
        per_policy[name] = (sub["header"], sub["rows"])
        table.append([sub["summary"].get(c) for c in columns])
        print(f"{name}: lambda_adm={sub['summary']['lambda_adm_mean']:.4g} "
              f"rt95_bottleneck={sub['summary'][f'rt95_tier{n_tiers}']}")
    write_table_csv(args.out / "comparison.csv", columns, table)
    if not args.no_plots:
        from . import plots as plotmod

        plotmod.plot_compare(per_policy, scenario, args.out / "compare.png")
    print(f"wrote {args.out}/comparison.csv")
    return 0


def cmd_sweep(args) -> int:
    scenario = _load(args)
    policy_name = args.policy or scenario.policy.name
    raw_values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not raw_values:
        raise ConfigError("sweep needs at least one value")
    if args.param == "seed":
        values = [int(v) for v in raw_values]
    else:
        values = [float(v) for v in raw_values]
    args.out.mkdir(parents=True, exist_ok=True)
    n_tiers = scenario.cluster.n_tiers
    columns = ["param", "value"] + COMPARE_COLUMNS[1:] + [
        f"rt95_tier{i + 1}" for i in range(n_tiers)
    ]
    table = []
    summaries = []
    for value in values:
        variant = scenario.with_overrides(**{args.param: value})
        result, policy = simulate(variant, policy_name)
        sub = _write_run_outputs(
            args.out / f"{args.param}={value:g}", variant, policy_name, result, policy,
            plots=False, dump=False,
        )
        summaries.append(sub["summary"])
        table.append([args.param, value] + [sub["summary"].get(c) for c in columns[2:]])
        print(f"{args.param}={value:g}: lambda_adm={sub['summary']['lambda_adm_mean']:.4g}")
    write_table_csv(args.out / "sweep.csv", columns, table)
    if not args.no_plots:
        from . import plots as plotmod

        bottleneck = max(
            range(n_tiers), key=lambda i: scenario.cluster.tiers[i].mean_service_time
        )
        plotmod.plot_sweep(
            args.param, values, summaries, f"rt95_tier{bottleneck + 1}",
            args.out / "sweep.png",
        )
    print(f"wrote {args.out}/sweep.csv")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "compare":
            return cmd_compare(args)
        return cmd_sweep(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (InternalConsistencyError, AssertionError) as exc:
        print(f"runtime assertion failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
