"""Residual scoring, threshold sweeping, flagging, and taxonomy tagging.

The score for each sample is the absolute z-score of the residual
(prediction minus observation) against the mean and sample standard
deviation of the residual series.  Points whose score strictly exceeds the
chosen threshold are flagged; flags then get a qualitative tag describing
the anomaly's temporal shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .dataset import TimeSeries
from .errors import DegenerateSeriesError

DEFAULT_GRID = np.round(np.arange(2.5, 4.5 + 1e-9, 0.05), 10)
DEFAULT_TARGET_RATE = 0.01

TAG_SHORT_SPIKE = "short-spike"
TAG_SHORT_DIP = "short-dip"
TAG_TIME_OF_DAY = "time-of-day"
TAG_DAY_OF_WEEK = "day-of-week"
TAG_NONE = "untagged"


@dataclass
class ScoreSeries:
    delta: np.ndarray
    delta_mean: float
    delta_std: float
    epsilon: np.ndarray
    timestamps: list[datetime] | None = None


@dataclass
class ThresholdCurve:
    thresholds: np.ndarray
    anomaly_rates: np.ndarray


@dataclass
class AnomalyReport:
    flagged: np.ndarray          # indices, sorted by descending epsilon
    epsilon: np.ndarray          # epsilon per flagged index
    threshold: float
    at_target: bool = True
    tags: list[str] = field(default_factory=list)


def residuals(predicted: np.ndarray, observed: np.ndarray) -> np.ndarray:
    predicted = np.asarray(predicted, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    if predicted.shape != observed.shape:
        raise ValueError("predicted/observed length mismatch")
    return predicted - observed


def normalize_scores(
    delta: np.ndarray,
    timestamps: list[datetime] | None = None,
    stats: tuple[float, float] | None = None,
) -> ScoreSeries:
    """Absolute z-scores of the residuals.

    ``stats`` supplies a precomputed (mean, std) pair so partitions of a
    series can be scored consistently; otherwise both are fitted here with
    the 1/(n-1) sample estimator.
    """
    delta = np.asarray(delta, dtype=np.float64)
    if stats is not None:
        mean, std = stats
    else:
        if delta.size < 2:
            raise DegenerateSeriesError("need at least 2 residuals")
        mean = float(delta.mean())
        std = float(delta.std(ddof=1))
    if std == 0.0:
        raise DegenerateSeriesError("constant residual series")
    epsilon = np.abs((delta - mean) / std)
    return ScoreSeries(
        delta=delta, delta_mean=mean, delta_std=std, epsilon=epsilon, timestamps=timestamps
    )


def sweep_thresholds(scores: ScoreSeries, grid: np.ndarray | None = None) -> ThresholdCurve:
    """Fraction of samples scoring strictly above each grid threshold."""
    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("empty threshold grid")
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted ascending")
    n = scores.epsilon.size
    rates = np.array([(scores.epsilon > thr).sum() / n for thr in grid])
    return ThresholdCurve(thresholds=grid, anomaly_rates=rates)


def select_threshold(curve: ThresholdCurve, target_rate: float) -> tuple[float, bool]:
    """Smallest grid threshold whose anomaly rate is at or under target.

    Falls back to the largest threshold (with at_target=False) when even
    that leaves the rate above target.
    """
    if not 0.0 < target_rate < 1.0:
        raise ValueError("target_rate must be in (0, 1)")
    if curve.thresholds.size == 0:
        raise ValueError("empty curve")
    hits = np.nonzero(curve.anomaly_rates <= target_rate)[0]
    if hits.size:
        return float(curve.thresholds[hits[0]]), True
    return float(curve.thresholds[-1]), False


def flag_anomalies(scores: ScoreSeries, threshold: float, at_target: bool = True) -> AnomalyReport:
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    idx = np.nonzero(scores.epsilon > threshold)[0]
    order = np.argsort(-scores.epsilon[idx], kind="stable")
    idx = idx[order]
    return AnomalyReport(
        flagged=idx,
        epsilon=scores.epsilon[idx],
        threshold=threshold,
        at_target=at_target,
        tags=[TAG_NONE] * idx.size,
    )


def tag_taxonomy(
    report: AnomalyReport,
    series: TimeSeries,
    scores: ScoreSeries,
    short_run: int = 3,
    recurrence_days: int = 3,
    day_fraction: float = 0.25,
) -> AnomalyReport:
    """Attach a qualitative tag to each flag.

    Recurring patterns are the most specific and win over isolated blips:
    a flag whose hour-of-day is flagged on >= ``recurrence_days`` distinct
    days is time-of-day; a flag on a calendar day with >= ``day_fraction``
    of its samples flagged is day-of-week; an isolated run of at most
    ``short_run`` flagged samples is a short spike (observed above
    prediction, negative residual) or dip; anything else stays untagged.
    """
    flagged = set(int(i) for i in report.flagged)
    timestamps = [r.timestamp for r in series.records]

    hour_days: dict[int, set] = {}
    day_counts: dict = {}
    day_flagged: dict = {}
    for ts in timestamps:
        day_counts[ts.date()] = day_counts.get(ts.date(), 0) + 1
    for i in flagged:
        ts = timestamps[i]
        hour_days.setdefault(ts.hour, set()).add(ts.date())
        day_flagged[ts.date()] = day_flagged.get(ts.date(), 0) + 1

    # Runs of consecutive flagged indices, for the short-spike/dip rule.
    run_of: dict[int, tuple[int, int]] = {}
    sorted_idx = sorted(flagged)
    start = None
    prev = None
    for i in sorted_idx + [None]:
        if start is None:
            start = i
        elif i is None or i != prev + 1:
            for j in range(start, prev + 1):
                run_of[j] = (start, prev)
            start = i
        prev = i

    tags = []
    for i in report.flagged:
        i = int(i)
        ts = timestamps[i]
        if len(hour_days.get(ts.hour, ())) >= recurrence_days:
            tags.append(TAG_TIME_OF_DAY)
        elif day_flagged.get(ts.date(), 0) >= day_fraction * day_counts[ts.date()]:
            tags.append(TAG_DAY_OF_WEEK)
        else:
            lo, hi = run_of[i]
            if hi - lo + 1 <= short_run:
                mean_delta = scores.delta[lo : hi + 1].mean()
                tags.append(TAG_SHORT_SPIKE if mean_delta < 0 else TAG_SHORT_DIP)
            else:
                tags.append(TAG_NONE)
    report.tags = tags
    return report
