"""Scenario files: schema, validation, overrides and policy construction.

Scenarios are YAML documents with an explicit `schema_version`. Validation
errors carry the full key path so the CLI can print line-level diagnostics;
required fields have no silent defaults.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .core import ClusterSpec, ConfigError, SlaSpec, TierSpec
from .policy import (
    AdaptiveConfig,
    AdaptivePolicy,
    AlwaysAdmitPolicy,
    Policy,
    ProbabilisticConfig,
    ProbabilisticPolicy,
    ThresholdConfig,
    ThresholdPolicy,
    benchmark_idle,
)
from .traffic import Phase, Segment, SessionTemplate, TrafficProfile

SCHEMA_VERSION = 1
POLICY_NAMES = ("adaptive", "base", "threshold", "probabilistic", "always")
SWEEP_PARAMS = ("arrival_rate", "t_ac", "l_lambda", "k_sigma", "seed")


@dataclass(frozen=True)
class PolicySettings:
    name: str
    adaptive: AdaptiveConfig
    threshold: ThresholdConfig
    probabilistic: ProbabilisticConfig


@dataclass(frozen=True)
class Scenario:
    seed: int
    horizon: float
    warmup: float | None            # None: 10 control periods of the chosen policy
    sample_interval: float
    cluster: ClusterSpec
    sla: SlaSpec
    profile: TrafficProfile
    template: SessionTemplate
    policy: PolicySettings

    def control_period(self, policy_name: str | None = None) -> float:
        name = policy_name or self.policy.name
        if name in ("adaptive", "base"):
            return self.policy.adaptive.t_ac
        if name == "threshold":
            return self.policy.threshold.period
        if name == "probabilistic":
            return self.policy.probabilistic.period
        return self.sample_interval

    def effective_warmup(self, policy_name: str | None = None) -> float:
        if self.warmup is not None:
            return self.warmup
        return min(10.0 * self.control_period(policy_name), self.horizon / 2.0)

    def validate(self) -> None:
        self.cluster.validate()
        self.sla.validate()
        self.profile.validate()
        self.template.validate(self.cluster.n_tiers)
        if len(self.sla.rt_limits) != self.cluster.n_tiers:
            raise ConfigError(
                f"sla.rt_limits has {len(self.sla.rt_limits)} entries for "
                f"{self.cluster.n_tiers} tiers"
            )
        if self.horizon <= 0:
            raise ConfigError("horizon must be > 0")
        if self.sample_interval <= 0:
            raise ConfigError("sample_interval must be > 0")
        if self.policy.name not in POLICY_NAMES:
            raise ConfigError(f"policy.name must be one of {POLICY_NAMES}")
        if self.warmup is not None and self.warmup >= self.horizon:
            raise ConfigError("warmup must be smaller than horizon")

    def to_dict(self) -> dict:
        """Round-trippable effective configuration (echoed into summaries)."""
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "horizon": self.horizon,
            "warmup": self.warmup,
            "sample_interval": self.sample_interval,
            "cluster": {
                "tiers": [
                    {"servers": t.servers, "mean_service_time": t.mean_service_time}
                    for t in self.cluster.tiers
                ]
            },
            "sla": {
                "rt_limits": list(self.sla.rt_limits),
                "lambda_min": self.sla.lambda_min,
                "check_interval": self.sla.check_interval,
            },
            "traffic": {
                "segments": [{"start": s.start, "rate": s.rate} for s in self.profile.segments]
            },
            "session": {
                "phases": [
                    {"tier": ph.tier + 1, "dist": ph.dist, "value": ph.value}
                    for ph in self.template.phases
                ],
                "think_mean": self.template.think_mean,
                "think_floor": self.template.think_floor,
                "client_timeout": self.template.client_timeout,
            },
            "policy": {
                "name": self.policy.name,
                "adaptive": dataclasses.asdict(self.policy.adaptive),
                "threshold": {
                    "period": self.policy.threshold.period,
                    "rt_thresholds": (
                        list(self.policy.threshold.rt_thresholds)
                        if self.policy.threshold.rt_thresholds
                        else None
                    ),
                },
                "probabilistic": dataclasses.asdict(self.policy.probabilistic),
            },
        }

    def with_overrides(self, **kw) -> "Scenario":
        """Apply CLI/sweep overrides; unknown keys raise ConfigError."""
        out = self
        for key, value in kw.items():
            if value is None:
                continue
            if key == "seed":
                out = dataclasses.replace(out, seed=int(value))
            elif key == "horizon":
                out = dataclasses.replace(out, horizon=float(value))
            elif key == "policy":
                if value not in POLICY_NAMES:
                    raise ConfigError(f"unknown policy {value!r}; choose from {POLICY_NAMES}")
                out = dataclasses.replace(
                    out, policy=dataclasses.replace(out.policy, name=value)
                )
            elif key == "arrival_rate":
                segs = tuple(Segment(s.start, float(value)) for s in out.profile.segments)
                out = dataclasses.replace(out, profile=TrafficProfile(segs))
            elif key == "t_ac":
                pol = dataclasses.replace(
                    out.policy,
                    adaptive=dataclasses.replace(out.policy.adaptive, t_ac=float(value)),
                    threshold=dataclasses.replace(out.policy.threshold, period=float(value)),
                    probabilistic=dataclasses.replace(
                        out.policy.probabilistic, period=float(value)
                    ),
                )
                out = dataclasses.replace(out, policy=pol)
            elif key == "l_lambda":
                pol = dataclasses.replace(
                    out.policy,
                    adaptive=dataclasses.replace(out.policy.adaptive, l_lambda=float(value)),
                )
                out = dataclasses.replace(out, policy=pol)
            elif key == "k_sigma":
                pol = dataclasses.replace(
                    out.policy,
                    adaptive=dataclasses.replace(out.policy.adaptive, k_sigma=float(value)),
                )
                out = dataclasses.replace(out, policy=pol)
            else:
                raise ConfigError(f"unknown override {key!r}")
        return out


def build_policy(scenario: Scenario, streams, name: str | None = None) -> Policy:
    """Instantiate the selected policy; adaptive variants run the offline
    idle benchmark on the dedicated stream first."""
    name = name or scenario.policy.name
    if name in ("adaptive", "base"):
        cfg = scenario.policy.adaptive
        if name == "base":
            cfg = dataclasses.replace(cfg, flash_crowd=False)
        bench = benchmark_idle(scenario.cluster, streams.bench, cfg.bench_samples)
        pol = AdaptivePolicy(cfg, scenario.sla, bench, streams.admission)
        pol.name = name
        return pol
    if name == "threshold":
        return ThresholdPolicy(scenario.policy.threshold, scenario.sla)
    if name == "probabilistic":
        return ProbabilisticPolicy(scenario.policy.probabilistic, scenario.sla, streams.admission)
    if name == "always":
        return AlwaysAdmitPolicy()
    raise ConfigError(f"unknown policy {name!r}")


# -- YAML parsing -------------------------------------------------------------


def _get(d: dict, key: str, path: str, required: bool = True, default=None):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected a mapping")
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: required field missing")
        return default
    return d[key]


def _num(value, path: str, minimum=None, strict_min=None, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    v = float(value)
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {v}")
    if strict_min is not None and v <= strict_min:
        raise ConfigError(f"{path}: must be > {strict_min}, got {v}")
    return v


def _int(value, path: str, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value}")
    return value


def scenario_from_dict(data: dict, source: str = "<scenario>") -> Scenario:
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    version = _get(data, "schema_version", source)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{source}.schema_version: expected {SCHEMA_VERSION}, got {version!r}")

    seed = _int(_get(data, "seed", source), f"{source}.seed", minimum=0)
    horizon = _num(_get(data, "horizon", source), f"{source}.horizon", strict_min=0)
    warmup = _num(data.get("warmup"), f"{source}.warmup", minimum=0, allow_none=True)
    sample_interval = _num(
        _get(data, "sample_interval", source), f"{source}.sample_interval", strict_min=0
    )

    cl = _get(data, "cluster", source)
    tiers_raw = _get(cl, "tiers", f"{source}.cluster")
    if not isinstance(tiers_raw, list) or not tiers_raw:
        raise ConfigError(f"{source}.cluster.tiers: expected a non-empty list")
    tiers = []
    for i, t in enumerate(tiers_raw):
        tpath = f"{source}.cluster.tiers[{i}]"
        tiers.append(
            TierSpec(
                servers=_int(_get(t, "servers", tpath), f"{tpath}.servers", minimum=1),
                mean_service_time=_num(
                    _get(t, "mean_service_time", tpath),
                    f"{tpath}.mean_service_time",
                    strict_min=0,
                ),
            )
        )
    cluster = ClusterSpec(tuple(tiers))

    sl = _get(data, "sla", source)
    limits_raw = _get(sl, "rt_limits", f"{source}.sla")
    if not isinstance(limits_raw, list) or not limits_raw:
        raise ConfigError(f"{source}.sla.rt_limits: expected a non-empty list")
    rt_limits = tuple(
        _num(v, f"{source}.sla.rt_limits[{i}]", strict_min=0) for i, v in enumerate(limits_raw)
    )
    sla = SlaSpec(
        rt_limits=rt_limits,
        lambda_min=_num(_get(sl, "lambda_min", f"{source}.sla"), f"{source}.sla.lambda_min", minimum=0),
        check_interval=_num(
            _get(sl, "check_interval", f"{source}.sla"),
            f"{source}.sla.check_interval",
            strict_min=0,
        ),
    )

    tr = _get(data, "traffic", source)
    segs_raw = _get(tr, "segments", f"{source}.traffic")
    if not isinstance(segs_raw, list) or not segs_raw:
        raise ConfigError(f"{source}.traffic.segments: expected a non-empty list")
    segments = tuple(
        Segment(
            start=_num(_get(s, "start", f"{source}.traffic.segments[{i}]"),
                       f"{source}.traffic.segments[{i}].start", minimum=0),
            rate=_num(_get(s, "rate", f"{source}.traffic.segments[{i}]"),
                      f"{source}.traffic.segments[{i}].rate", minimum=0),
        )
        for i, s in enumerate(segs_raw)
    )
    profile = TrafficProfile(segments)

    se = _get(data, "session", source)
    phases_raw = _get(se, "phases", f"{source}.session")
    if not isinstance(phases_raw, list) or not phases_raw:
        raise ConfigError(f"{source}.session.phases: expected a non-empty list")
    phases = []
    for i, ph in enumerate(phases_raw):
        ppath = f"{source}.session.phases[{i}]"
        dist = _get(ph, "dist", ppath)
        phases.append(
            Phase(
                tier=_int(_get(ph, "tier", ppath), f"{ppath}.tier", minimum=1) - 1,
                dist=str(dist),
                value=_num(_get(ph, "value", ppath), f"{ppath}.value", strict_min=0),
            )
        )
    template = SessionTemplate(
        phases=tuple(phases),
        think_mean=_num(_get(se, "think_mean", f"{source}.session"),
                        f"{source}.session.think_mean", strict_min=0),
        think_floor=_num(_get(se, "think_floor", f"{source}.session"),
                         f"{source}.session.think_floor", strict_min=0),
        client_timeout=_num(_get(se, "client_timeout", f"{source}.session"),
                            f"{source}.session.client_timeout", strict_min=0, allow_none=True),
    )

    po = _get(data, "policy", source)
    name = _get(po, "name", f"{source}.policy")
    ad = po.get("adaptive", {}) or {}
    th = po.get("threshold", {}) or {}
    pr = po.get("probabilistic", {}) or {}
    adaptive = AdaptiveConfig(
        t_ac=_num(ad.get("t_ac", 40.0), f"{source}.policy.adaptive.t_ac", strict_min=0),
        k_sigma=_num(ad.get("k_sigma", 3.0), f"{source}.policy.adaptive.k_sigma", minimum=0),
        l_lambda=_num(ad.get("l_lambda"), f"{source}.policy.adaptive.l_lambda",
                      strict_min=0, allow_none=True),
        flash_crowd=bool(ad.get("flash_crowd", True)),
        bench_samples=_int(ad.get("bench_samples", 1000),
                           f"{source}.policy.adaptive.bench_samples", minimum=1),
    )
    thresholds_raw = th.get("rt_thresholds")
    if thresholds_raw is not None:
        if not isinstance(thresholds_raw, list):
            raise ConfigError(f"{source}.policy.threshold.rt_thresholds: expected a list")
        thresholds = tuple(
            _num(v, f"{source}.policy.threshold.rt_thresholds[{i}]", strict_min=0)
            for i, v in enumerate(thresholds_raw)
        )
    else:
        thresholds = None
    threshold = ThresholdConfig(
        period=_num(th.get("period", 40.0), f"{source}.policy.threshold.period", strict_min=0),
        rt_thresholds=thresholds,
    )
    probabilistic = ProbabilisticConfig(
        period=_num(pr.get("period", 40.0), f"{source}.policy.probabilistic.period", strict_min=0),
        rt_low=_num(pr.get("rt_low", 3.0), f"{source}.policy.probabilistic.rt_low", strict_min=0),
        rt_high=_num(pr.get("rt_high", 5.0), f"{source}.policy.probabilistic.rt_high", strict_min=0),
    )
    if not probabilistic.rt_low < probabilistic.rt_high:
        raise ConfigError(f"{source}.policy.probabilistic: require rt_low < rt_high")

    scenario = Scenario(
        seed=seed,
        horizon=horizon,
        warmup=warmup,
        sample_interval=sample_interval,
        cluster=cluster,
        sla=sla,
        profile=profile,
        template=template,
        policy=PolicySettings(
            name=str(name), adaptive=adaptive, threshold=threshold, probabilistic=probabilistic
        ),
    )
    scenario.validate()
    return scenario


def canned_scenario_names() -> list[str]:
    root = resources.files("admissim").joinpath("scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_scenario(ref: str | Path) -> Scenario:
    """Load a scenario from a file path or a canned scenario name."""
    path = Path(ref)
    if path.exists():
        text = path.read_text()
        source = str(path)
    else:
        root = resources.files("admissim").joinpath("scenarios")
        candidate = root.joinpath(f"{ref}.yaml")
        if not candidate.is_file():
            raise ConfigError(
                f"scenario {ref!r} is neither a file nor a canned scenario "
                f"(canned: {', '.join(canned_scenario_names())})"
            )
        text = candidate.read_text()
        source = f"canned:{ref}"
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: YAML parse error: {exc}") from exc
    return scenario_from_dict(data, source)
