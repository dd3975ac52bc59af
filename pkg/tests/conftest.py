"""Shared scenario builders for the test suite."""

from __future__ import annotations

import pytest

from admissim.core import ClusterSpec, SlaSpec, TierSpec
from admissim.policy import AdaptiveConfig, ProbabilisticConfig, ThresholdConfig
from admissim.scenario import PolicySettings, Scenario
from admissim.traffic import Phase, Segment, SessionTemplate, TrafficProfile


def make_scenario(
    *,
    seed: int = 42,
    horizon: float = 1000.0,
    rate: float = 8.0,
    segments: tuple[tuple[float, float], ...] | None = None,
    tiers: tuple[tuple[int, float], ...] = ((20, 0.001), (20, 0.01), (20, 1.0)),
    rt_limits: tuple[float, ...] = (1.0, 1.0, 5.0),
    lambda_min: float = 4.0,
    check_interval: float = 60.0,
    phases: tuple[tuple[int, str, float], ...] = (
        (2, "geometric", 5.0),
        (1, "geometric", 5.0),
        (0, "geometric", 5.0),
    ),
    think_mean: float = 10.0,
    think_floor: float = 1.0,
    client_timeout: float | None = 8.0,
    policy_name: str = "adaptive",
    t_ac: float = 40.0,
    k_sigma: float = 3.0,
    l_lambda: float | None = None,
    flash_crowd: bool = True,
    period: float = 40.0,
    rt_low: float = 3.0,
    rt_high: float = 5.0,
    sample_interval: float = 10.0,
    warmup: float | None = None,
) -> Scenario:
    segs = segments if segments is not None else ((0.0, rate),)
    scenario = Scenario(
        seed=seed,
        horizon=horizon,
        warmup=warmup,
        sample_interval=sample_interval,
        cluster=ClusterSpec(tuple(TierSpec(s, m) for s, m in tiers)),
        sla=SlaSpec(rt_limits=rt_limits, lambda_min=lambda_min, check_interval=check_interval),
        profile=TrafficProfile(tuple(Segment(s, r) for s, r in segs)),
        template=SessionTemplate(
            phases=tuple(Phase(t, d, v) for t, d, v in phases),
            think_mean=think_mean,
            think_floor=think_floor,
            client_timeout=client_timeout,
        ),
        policy=PolicySettings(
            name=policy_name,
            adaptive=AdaptiveConfig(
                t_ac=t_ac, k_sigma=k_sigma, l_lambda=l_lambda, flash_crowd=flash_crowd
            ),
            threshold=ThresholdConfig(period=period),
            probabilistic=ProbabilisticConfig(period=period, rt_low=rt_low, rt_high=rt_high),
        ),
    )
    scenario.validate()
    return scenario


@pytest.fixture
def scenario():
    return make_scenario()


# One line per acceptance criterion, shown after the run regardless of
# capture settings (test_acceptance.py appends to this).
ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)
