"""Machine-learning and seasonal baselines sharing the forecasters' prediction tasks."""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from ..forecasters import PredictionRun
from .features import ECON_DIM, FeatureRow, econ_block, feature_matrix, lagged_targets, training_rows
from .forest import ForestModel, fit_rf2
from .linear import LinearModel, fit_ar2
from .mlp import MlpModel, fit_mlp2
from .seasonal import hour_of_day_means, seasonal_mean

BASELINES = ("AR2", "RF2", "MLP2", "Seasonal")

__all__ = [
    "BASELINES", "BaselineOptions", "ECON_DIM", "FeatureRow", "ForestModel", "LinearModel", "MlpModel",
    "econ_block", "feature_matrix", "fit_ar2", "fit_baseline", "fit_mlp2", "fit_rf2", "hour_of_day_means",
    "lagged_targets", "predict_baseline", "seasonal_mean", "training_rows",
]


@dataclass
class BaselineOptions:
    rf_trees: int = 100
    rf_depth: int = 2
    mlp_hidden: int = 128
    mlp_epochs: int = 100
    mlp_batch: int = 10
    mlp_lr: float = 1e-4
    mlp_beta1: float = 0.9
    mlp_beta2: float = 0.999
    mlp_eps: float = 1e-8
    stepahead_retrain: bool = True
    mlp_stepahead_retrain: bool = True
    bid_max_factor: float = 6.0
    seed: int = 0


def bidder_seed(seed: int, bidder_id: str, method: str) -> int:
    """Per-(bidder, method) seed that does not depend on processing order."""
    return int(np.random.SeedSequence([seed, zlib.crc32(bidder_id.encode()), zlib.crc32(method.encode())]).generate_state(1)[0])


def fit_baseline(method: str, X, y, options: BaselineOptions, seed: int):
    if method == "AR2":
        return fit_ar2(X, y)
    if method == "RF2":
        return fit_rf2(X, y, seed, options.rf_trees, options.rf_depth)
    if method == "MLP2":
        return fit_mlp2(
            X, y, seed, options.mlp_hidden, options.mlp_epochs, options.mlp_batch, options.mlp_lr,
            (options.mlp_beta1, options.mlp_beta2), options.mlp_eps,
        )
    raise ValueError(f"unknown baseline {method!r}")


def _retrains(method: str, options: BaselineOptions) -> bool:
    if method == "MLP2":
        return options.stepahead_retrain and options.mlp_stepahead_retrain
    return options.stepahead_retrain


def predict_baseline(
    method: str,
    mode: str,
    series,
    train_idx=None,
    test_idx=None,
    use_econ: bool = False,
    options: BaselineOptions | None = None,
    model=None,
) -> PredictionRun:
    """Series or stepahead predictions of one baseline over the test hours.

    In series mode the model's own predictions become the next lags (and
    the econ features are evaluated at those predicted bids on the true
    curves). In stepahead mode the lags are true bids and the model is
    retrained on every row available before the predicted hour.
    """
    options = options or BaselineOptions()
    train_idx = series.train_idx if train_idx is None else np.asarray(train_idx)
    test_idx = series.test_idx if test_idx is None else np.asarray(test_idx)
    bid_max = options.bid_max_factor * float(np.mean(series.bids[train_idx]))
    hours = series.hours[test_idx]
    truth = series.bids[test_idx]

    if method == "Seasonal":
        if mode == "series" or not options.stepahead_retrain:
            preds = seasonal_mean(series, train_idx, test_idx)
        else:
            preds = np.array([
                seasonal_mean(series, np.union1d(train_idx, test_idx[:j]), test_idx[j:j + 1])[0]
                for j in range(len(test_idx))
            ])
        return PredictionRun(mode, np.clip(preds, 0.0, bid_max), hours, truth)

    seed = bidder_seed(options.seed, series.bidder_id, method + ("+econ" if use_econ else ""))
    curves = series.curves
    if model is None:
        model = fit_baseline(method, *training_rows(series, train_idx, use_econ), options, seed)
    preds = np.empty(len(test_idx))
    if mode == "series":
        lag1, lag2 = float(series.bids[test_idx[0] - 1]), float(series.bids[test_idx[0] - 2])
        for j, t in enumerate(test_idx):
            x = feature_matrix(curves, t, lag1, lag2, use_econ)
            pred = float(np.clip(model.predict(x)[0], 0.0, bid_max))
            preds[j] = pred
            lag1, lag2 = pred, lag1
    elif mode == "stepahead":
        retrain = _retrains(method, options)
        b = series.bids
        for j, t in enumerate(test_idx):
            if retrain and j > 0:
                seen = np.union1d(train_idx, test_idx[:j])
                model = fit_baseline(method, *training_rows(series, seen, use_econ), options, seed)
            x = feature_matrix(curves, t, b[t - 1], b[t - 2], use_econ)
            preds[j] = float(np.clip(model.predict(x)[0], 0.0, bid_max))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return PredictionRun(mode, preds, hours, truth)
