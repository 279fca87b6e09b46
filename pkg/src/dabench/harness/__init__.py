"""Experiment harness: configs, stages, metrics, forecasting, reports."""

from .config import ExperimentConfig, ForecastSettings, McmcSettings, MethodSpec, load_config
from .experiment import GoldStandard, MethodOutput, generate_truth_and_data
from .forecast import forecast
from .metrics import relative_errors
from .report import ExperimentReport, MethodRow, emit_report, load_report
from .stages import run_experiment

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "ForecastSettings",
    "GoldStandard",
    "McmcSettings",
    "MethodOutput",
    "MethodRow",
    "MethodSpec",
    "emit_report",
    "forecast",
    "generate_truth_and_data",
    "load_config",
    "load_report",
    "relative_errors",
    "run_experiment",
]
