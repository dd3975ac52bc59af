"""Discrete-event simulator of a session-based multi-tier web cluster with a
pluggable admission-control layer and a scenario-driven CLI."""

from __future__ import annotations

from .engine import RngStreams, RunResult, Simulator
from .scenario import Scenario, build_policy, load_scenario

__all__ = [
    "RngStreams",
    "RunResult",
    "Scenario",
    "Simulator",
    "build_policy",
    "load_scenario",
    "simulate",
]

__version__ = "0.1.0"


def simulate(scenario: Scenario, policy_name: str | None = None):
    """Run one scenario end to end; returns (RunResult, policy instance).

    A fresh stream set is derived from the scenario seed, so repeated calls
    are bit-identical and different policies see the same traffic trace.
    """
    streams = RngStreams(scenario.seed, scenario.cluster.n_tiers)
    policy = build_policy(scenario, streams, policy_name)
    sim = Simulator(scenario, policy, streams)
    result = sim.run()
    return result, policy
