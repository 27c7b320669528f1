"""Experiment harness: configs, runners, persistence, plotting, CLI."""

from .config import ExperimentConfig, TuneGrid, default_enff_grid, default_ensf_grid, load_config
from .runner import RunRecord, free_run_rmse, rmse, run_experiment, summarize, tune
from .storage import emit_csv, load_truth, read_csv, save_truth
from .plotting import emit_plot

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "TuneGrid",
    "default_enff_grid",
    "default_ensf_grid",
    "emit_csv",
    "emit_plot",
    "free_run_rmse",
    "load_config",
    "load_truth",
    "read_csv",
    "rmse",
    "run_experiment",
    "save_truth",
    "summarize",
    "tune",
]
