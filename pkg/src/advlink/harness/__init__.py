"""Experiment harness: configuration, sweeps, CSV results and the CLI."""

from .config import ConfigError, ExperimentConfig, canonical_hash, load_experiment
from .experiments import (
    complexity_report,
    covertness_dump,
    load_attack,
    outage_probability,
    outage_threshold,
    run_sweep,
)
from .results import ProvenanceError, ResultRow, merge_result_files, to_csv

__all__ = [
    "ConfigError", "ExperimentConfig", "ProvenanceError", "ResultRow", "canonical_hash",
    "complexity_report", "covertness_dump", "load_attack", "load_experiment",
    "merge_result_files", "outage_probability", "outage_threshold", "run_sweep", "to_csv",
]
