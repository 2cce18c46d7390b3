"""Stealthy false-data-injection detection on DC power-grid models.

Thin Python layer over the C++ core: case loading, DC state estimation,
attack dataset generation, SVM/KNN/ANN classifiers, wrapper feature
selection and the benchmark matrix.
"""

import os
from pathlib import Path

from . import _core
from ._core import (
    BusSystem,
    Dataset,
    FdiError,
    Jacobian,
    Model,
    build_jacobian,
    calibrate_threshold,
    config_keys,
    config_manifest,
    generate_dataset,
    load_model,
    read_dataset_csv,
    residual_norm,
    solve_dc_flow,
    stealthiness_report,
    stealthy_attack,
    train_model,
    wls_estimate,
)

__all__ = [
    "BusSystem",
    "Dataset",
    "FdiError",
    "Jacobian",
    "Model",
    "build_jacobian",
    "calibrate_threshold",
    "case_dir",
    "config_keys",
    "config_manifest",
    "generate_dataset",
    "grid_search",
    "load_case",
    "load_model",
    "read_dataset_csv",
    "residual_norm",
    "run_benchmark",
    "select_features",
    "solve_dc_flow",
    "stealthiness_report",
    "stealthy_attack",
    "train_model",
    "wls_estimate",
]


def case_dir():
    """Directory searched for case names: $FDILAB_CASE_DIR, else the bundled cases."""
    env = os.environ.get("FDILAB_CASE_DIR")
    if env:
        return env
    return str(Path(__file__).with_name("cases"))


def load_case(name):
    """Load `ieee14`, `ieee57`, `ieee118` or any case file path."""
    return _core.load_case(str(name), case_dir())


def select_features(train, method="ga", config=None):
    return _core.select_features(train, method, dict(config or {}), case_dir())


def grid_search(data, classifier="svm", config=None):
    return _core.grid_search(data, classifier, dict(config or {}), case_dir())


def run_benchmark(config=None):
    """Run the benchmark matrix; `config` maps RunConfig keys to values."""
    return _core.run_benchmark(dict(config or {}), case_dir())
