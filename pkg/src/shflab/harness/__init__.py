"""Experiment orchestration, confidence bands, CLT diagnostics and the CLI."""

from .bands import BetaBands, band_fraction, beta_bands, in_band_via_log
from .clt import CltStatistic, normality_diagnostics, standardize_log_sums, synthetic_clt
from .config import RunConfig, load_config, parse_config
from .experiments import run_experiment, run_many
from .records import ExperimentRecord, content_hash

__all__ = [
    "BetaBands",
    "beta_bands",
    "band_fraction",
    "in_band_via_log",
    "CltStatistic",
    "normality_diagnostics",
    "standardize_log_sums",
    "synthetic_clt",
    "RunConfig",
    "load_config",
    "parse_config",
    "run_experiment",
    "run_many",
    "ExperimentRecord",
    "content_hash",
]
