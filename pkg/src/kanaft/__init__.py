"""Kolmogorov-Arnold networks for accelerated-failure-time survival regression."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    CsvSchema,
    SurvivalDataset,
    SyntheticSpec,
    generate,
    generate_linear,
    generate_nonlinear,
    load_csv,
    save_csv,
    split,
    standardize,
)
from .metrics import MetricReport, c_index, metric_report, mse_log  # noqa: E402
from .network import KanNetwork, RegConfig, init_network, prune  # noqa: E402
from .trainers import (  # noqa: E402
    FitConfig,
    TrainedModel,
    fit,
    fit_buckley_james,
    fit_ipcw,
    fit_transform,
    load_model,
    predict_time,
    save_model,
)

__all__ = [
    "CsvSchema",
    "FitConfig",
    "KanNetwork",
    "MetricReport",
    "RegConfig",
    "SurvivalDataset",
    "SyntheticSpec",
    "TrainedModel",
    "c_index",
    "fit",
    "fit_buckley_james",
    "fit_ipcw",
    "fit_transform",
    "generate",
    "generate_linear",
    "generate_nonlinear",
    "init_network",
    "load_csv",
    "load_model",
    "metric_report",
    "mse_log",
    "predict_time",
    "prune",
    "save_csv",
    "save_model",
    "split",
    "standardize",
]
