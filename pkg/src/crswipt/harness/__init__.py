"""Scenario configuration, channel draws, experiment sweeps and output."""

from .channels import PATHLOSS_AMPLITUDE, generate_channels
from .config import ConfigError, ExperimentConfig, load_config
from .experiments import ExperimentResult, Row, TrialResult, run_experiment
from .output import COLUMNS, emit, strip_timing, to_csv, to_json

__all__ = ['PATHLOSS_AMPLITUDE', 'generate_channels', 'ConfigError',
           'ExperimentConfig', 'load_config', 'ExperimentResult', 'Row',
           'TrialResult', 'run_experiment', 'COLUMNS', 'emit', 'strip_timing',
           'to_csv', 'to_json']
