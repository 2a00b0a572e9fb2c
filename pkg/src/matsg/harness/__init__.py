"""Experiment definitions, metrics, analysis and the command-line tool."""

from .analysis import analyze_buffer_regret, analyze_params, normalized_entropy
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .experiments import run_actions_experiment, run_ued_experiment
from .holdout import holdout_set, read_holdout, write_holdout
from .metrics import MetricsWriter, bin_metrics, read_metrics

__all__ = [
    "ConfigError", "ExperimentConfig", "MetricsWriter", "analyze_buffer_regret", "analyze_params", "bin_metrics",
    "holdout_set", "load_config", "normalized_entropy", "parse_config", "read_holdout", "read_metrics",
    "run_actions_experiment", "run_ued_experiment", "write_holdout",
]
