"""Brute-force k-nearest-neighbors regression baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class KnnConfig:
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


def knn_predict(
    train_X: np.ndarray,
    train_y: np.ndarray,
    query: np.ndarray,
    config: KnnConfig = KnnConfig(),
) -> float:
    """Mean target of the k nearest training rows by Euclidean distance.

    Ties break toward the lower row index (stable sort on distance).
    """
    train_X = np.asarray(train_X, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.float64)
    if train_X.shape[0] == 0:
        raise ValueError("empty training set")
    if config.k > train_X.shape[0]:
        raise ValueError(f"k={config.k} exceeds training size {train_X.shape[0]}")
    dists = np.linalg.norm(train_X - np.asarray(query, dtype=np.float64), axis=1)
    nearest = np.argsort(dists, kind="stable")[: config.k]
    return float(train_y[nearest].mean())


def knn_predict_batch(
    train_X: np.ndarray,
    train_y: np.ndarray,
    queries: np.ndarray,
    config: KnnConfig = KnnConfig(),
) -> np.ndarray:
    return np.array([knn_predict(train_X, train_y, q, config) for q in np.asarray(queries)])
