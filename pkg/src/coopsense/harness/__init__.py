"""Scenario loading, execution, metrics and reporting."""

from .checks import scenario_checks
from .metrics import occlusion_profile, required_braking_distance
from .report import CSV_COLUMNS, MetricsReport, TickRecord, emit_report, report_from_json
from .runner import run_scenario
from .scenario import (
    ScenarioError,
    ScenarioFile,
    ScenarioSpec,
    list_scenarios,
    load_scenario_file,
    resolve_scenario,
)

__all__ = [
    "CSV_COLUMNS",
    "MetricsReport",
    "ScenarioError",
    "ScenarioFile",
    "ScenarioSpec",
    "TickRecord",
    "emit_report",
    "list_scenarios",
    "load_scenario_file",
    "occlusion_profile",
    "report_from_json",
    "required_braking_distance",
    "resolve_scenario",
    "run_scenario",
    "scenario_checks",
]
