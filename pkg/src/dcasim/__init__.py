"""Fluid-model simulator and analytic oracles for delay-based congestion avoidance."""

from .analysis import FairnessReport, fairness_report, jain_index
from .engine import Engine, RunResult, run
from .model import (
    CrossTraffic,
    Discipline,
    FlowConfig,
    LinkConfig,
    LinkSide,
    Protocol,
    RedConfig,
    Remedy,
    RemedyParams,
    RenoConfig,
    ScenarioSpec,
    validate_scenario,
)
from .scenario_file import parse_scenario, spec_hash

__version__ = "0.1.0"
