"""Inverse problem: MLP regressors, Monte-Carlo oracle and achieved-factor evaluation."""

from .evaluate import (EmptySplit, ErrorMap, band_inversions, evaluate, localizable_force,
                       omega_theory)
from .mlp import gradient_check
from .oracle import OracleResult, mc_oracle, solve_contact
from .regressor import (Regressor, RegressorSpec, predict, split_index, split_masks,
                        train_regressor)

__all__ = [
    "EmptySplit", "ErrorMap", "band_inversions", "evaluate", "localizable_force", "omega_theory",
    "gradient_check", "OracleResult", "mc_oracle", "solve_contact", "Regressor", "RegressorSpec",
    "predict", "split_index", "split_masks", "train_regressor",
]
