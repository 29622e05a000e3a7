"""Configuration, experiment orchestration, reports and the command line."""

from deltashock.harness.config import (
    ExperimentConfig,
    FvSettings,
    ProfileSettings,
    parse_config,
    serialize_config,
)
from deltashock.harness.experiments import run_experiment
from deltashock.harness.report import ExperimentReport, write_report

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "FvSettings",
    "ProfileSettings",
    "parse_config",
    "run_experiment",
    "serialize_config",
    "write_report",
]
