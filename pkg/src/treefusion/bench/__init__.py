"""Datasets, synthetic generation, perturbations, metrics and experiments."""

from .data import Dataset, DataError, load_dataset, write_dataset
from .experiment import ConfigError, ExperimentConfig, ExperimentResult, run_experiment
from .metrics import MetricsReport, compute_metrics
from .perturb import PerturbKind, Perturbation, perturb
from .synth import SynthError, SyntheticSpec, synth_generate

__all__ = [
    "ConfigError", "DataError", "Dataset", "ExperimentConfig", "ExperimentResult",
    "MetricsReport", "PerturbKind", "Perturbation", "SynthError", "SyntheticSpec",
    "compute_metrics", "load_dataset", "perturb", "run_experiment", "synth_generate",
    "write_dataset",
]
