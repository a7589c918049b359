"""Configuration, scenario catalog, execution and command line."""

from .config import ConfigError, ExperimentConfig
from .runner import (ConditionError, RunReport, export_cf_tables, run_scenario,
                     simulate_table)
from .scenarios import get_scenario, list_scenarios

__all__ = [
    "ConfigError",
    "ConditionError",
    "ExperimentConfig",
    "RunReport",
    "export_cf_tables",
    "get_scenario",
    "list_scenarios",
    "run_scenario",
    "simulate_table",
]
