"""Scenario configuration, closed-loop runs, metrics and the CLI."""
from .config import ConfigError, ScenarioConfig, bundled, load_config, set_param
from .metrics import exp_decay_fit, run_metrics, settling_time
from .runner import COLUMNS, RunRecord, run_scenario

__all__ = [
    "COLUMNS",
    "ConfigError",
    "RunRecord",
    "ScenarioConfig",
    "bundled",
    "exp_decay_fit",
    "load_config",
    "run_metrics",
    "run_scenario",
    "set_param",
    "settling_time",
]
