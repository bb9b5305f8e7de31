"""Out-of-fold prediction: every instance scored by a model that never saw it.

Folds are contiguous temporal blocks by default, which respects the
autocorrelation of meter data; a seeded shuffle is available.  The feature
scaler (and optional target scaler) is refit inside each fold on the
training rows only, so no statistics leak from the held-out block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .baseline_knn import KnnConfig, knn_predict_batch
from .dfnn import MlpConfig, fit as mlp_fit
from .errors import DivergenceError
from .features import FeatureMatrix, Scaler

FitPredict = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class FoldPlan:
    n: int
    assignment: np.ndarray  # fold id per index

    @property
    def k(self) -> int:
        return int(self.assignment.max()) + 1


def plan_folds(n: int, k: int, mode: str = "contiguous", seed: int = 0) -> FoldPlan:
    """Assign each of n indices to one of k folds, sizes within 1 of each other."""
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= K <= n, got K={k}, n={n}")
    if mode not in ("contiguous", "shuffle"):
        raise ValueError(f"unknown fold mode {mode!r}")
    sizes = [n // k + (1 if f < n % k else 0) for f in range(k)]
    assignment = np.repeat(np.arange(k), sizes)
    if mode == "shuffle":
        rng = np.random.default_rng(seed)
        assignment = rng.permutation(assignment)
    return FoldPlan(n=n, assignment=assignment)


def split_plan(n: int, train_fraction: float) -> FoldPlan:
    """Two-fold plan from a single chronological train/test split."""
    cut = int(round(n * train_fraction))
    if not 0 < cut < n:
        raise ValueError("train fraction leaves an empty side")
    assignment = np.zeros(n, dtype=np.int64)
    assignment[cut:] = 1
    return FoldPlan(n=n, assignment=assignment)


def out_of_fold_predict(
    features: FeatureMatrix,
    targets: np.ndarray,
    plan: FoldPlan,
    fit_predict: FitPredict,
    scale_features: bool = True,
    scale_targets: bool = False,
) -> np.ndarray:
    """Predict every index from a model trained on the other folds.

    ``fit_predict(train_X, train_y, test_X)`` trains from scratch and returns
    predictions for test_X.  Scaling statistics come from the training rows
    of each fold only.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if features.values.shape[0] != plan.n or targets.shape[0] != plan.n:
        raise ValueError("feature/target length does not match fold plan")
    predictions = np.full(plan.n, np.nan)
    for fold in range(plan.k):
        test_mask = plan.assignment == fold
        train_idx = np.nonzero(~test_mask)[0]
        test_idx = np.nonzero(test_mask)[0]
        train_X = features.values[train_idx]
        test_X = features.values[test_idx]
        if scale_features:
            train_fm = FeatureMatrix(values=train_X, columns=list(features.columns))
            scaler = Scaler().fit(train_fm)
            train_X = scaler.transform(train_fm).values
            test_X = scaler.transform(
                FeatureMatrix(values=test_X, columns=list(features.columns))
            ).values
        train_y = targets[train_idx]
        if scale_targets:
            y_mean = train_y.mean()
            y_std = train_y.std(ddof=1) or 1.0
            train_y = (train_y - y_mean) / y_std
        try:
            preds = fit_predict(train_X, train_y, test_X)
        except DivergenceError as exc:
            raise DivergenceError(exc.epoch, f"fold {fold}: {exc}") from exc
        if scale_targets:
            preds = preds * y_std + y_mean
        predictions[test_idx] = preds
    assert not np.isnan(predictions).any()
    return predictions


def mlp_trainer(config: MlpConfig) -> FitPredict:
    def fit_predict(train_X, train_y, test_X):
        model, _ = mlp_fit(config, train_X, train_y)
        return model.predict_batch(test_X)

    return fit_predict


def knn_trainer(config: KnnConfig) -> FitPredict:
    def fit_predict(train_X, train_y, test_X):
        return knn_predict_batch(train_X, train_y, test_X, config)

    return fit_predict
