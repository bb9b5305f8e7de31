"""Regression and classification metrics for pipeline evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAPE_BANDS = ((10.0, "high"), (20.0, "good"), (50.0, "reasonable"))


def mape_band(value: float) -> str:
    for limit, band in MAPE_BANDS:
        if value <= limit:
            return band
    return "inaccurate"


@dataclass
class RegressionMetrics:
    mape: float
    rmse: float
    mae: float
    n: int
    mape_band: str
    mape_excluded: int = 0


@dataclass
class ClassificationMetrics:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


def _check(predicted, observed):
    predicted = np.asarray(predicted, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    if predicted.shape != observed.shape or predicted.ndim != 1:
        raise ValueError("predicted/observed must be equal-length vectors")
    if predicted.size == 0:
        raise ValueError("empty input")
    return predicted, observed


def mape(predicted, observed, signed: bool = False) -> tuple[float, int]:
    """Mean absolute percentage error; observed zeros are excluded.

    Returns (value, excluded count).  ``signed=True`` keeps the raw signed
    ratios (sign cancellation possible); the default takes absolute values.
    """
    predicted, observed = _check(predicted, observed)
    keep = observed != 0
    excluded = int((~keep).sum())
    if not keep.any():
        raise ValueError("all observed values are zero")
    ratio = (predicted[keep] - observed[keep]) / observed[keep]
    if not signed:
        ratio = np.abs(ratio)
    return float(ratio.mean() * 100.0), excluded


def rmse(predicted, observed) -> float:
    predicted, observed = _check(predicted, observed)
    return float(np.sqrt(np.mean((predicted - observed) ** 2)))


def mae(predicted, observed) -> float:
    predicted, observed = _check(predicted, observed)
    return float(np.mean(np.abs(predicted - observed)))


def regression_metrics(predicted, observed) -> RegressionMetrics:
    value, excluded = mape(predicted, observed)
    return RegressionMetrics(
        mape=value,
        rmse=rmse(predicted, observed),
        mae=mae(predicted, observed),
        n=len(np.asarray(predicted)),
        mape_band=mape_band(value),
        mape_excluded=excluded,
    )


def classification_metrics(flags, truth) -> ClassificationMetrics:
    flags = np.asarray(flags, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if flags.shape != truth.shape:
        raise ValueError("flags/truth length mismatch")
    tp = int((flags & truth).sum())
    fp = int((flags & ~truth).sum())
    fn = int((~flags & truth).sum())
    tn = int((~flags & ~truth).sum())
    n = flags.size
    accuracy = (tp + tn) / n if n else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    degenerate = precision + recall == 0.0
    f1 = 0.0 if degenerate else 2 * precision * recall / (precision + recall)
    return ClassificationMetrics(
        tp=tp, fp=fp, tn=tn, fn=fn,
        accuracy=accuracy, precision=precision, recall=recall, f1=f1,
        degenerate=degenerate,
    )
