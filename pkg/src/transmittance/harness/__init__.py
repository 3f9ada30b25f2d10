from .config import ConfigError, EstimatorEntry, ScenarioConfig, SweepSpec, load_config, parse_config
from .output import emit_csv, write_pgm
from .runner import Row, ScenarioResult, SummaryStats, run_scenario, summarize
from .scenarios import builtin_scenarios, get_builtin

__all__ = [
    "ConfigError",
    "EstimatorEntry",
    "Row",
    "ScenarioConfig",
    "ScenarioResult",
    "SummaryStats",
    "SweepSpec",
    "builtin_scenarios",
    "emit_csv",
    "get_builtin",
    "load_config",
    "parse_config",
    "run_scenario",
    "summarize",
    "write_pgm",
]
