"""Orthonormal Haar wavelet features for activity series.

Each cascade level maps pairs (a, b) to sum (a+b)/sqrt(2) and difference
(a-b)/sqrt(2); an odd trailing sample is carried into the next level
unchanged.  Both rules preserve energy exactly, so the transform is
Parseval-tight at every depth.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..exceptions import DimMismatch, EmptyDataset, InconsistentF, TooShort
from ..validation import check_fitted

_SQRT2 = np.sqrt(2.0)

MAX_DEFAULT_LEVELS = 4


def default_levels(n_samples: int) -> int:
    """Cascade depth when none is requested: min(4, floor(log2 T))."""
    if n_samples < 2:
        raise TooShort(f"series of {n_samples} samples has no wavelet content")
    return min(MAX_DEFAULT_LEVELS, int(np.floor(np.log2(n_samples))))


def haar_step(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One cascade level: (approx, detail); odd tail goes to approx as-is."""
    n = len(x)
    m = n // 2
    even = x[0 : 2 * m : 2]
    odd = x[1 : 2 * m : 2]
    approx = (even + odd) / _SQRT2
    detail = (even - odd) / _SQRT2
    if n % 2:
        approx = np.append(approx, x[-1])
    return approx, detail


def haar_dwt(x, levels: int | None = None) -> tuple[np.ndarray, list[np.ndarray]]:
    """Multi-level transform: final approximation plus finest-first details."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D series, got shape {x.shape}")
    if levels is None:
        levels = default_levels(len(x))
    if levels < 1:
        raise ValueError(f"levels {levels} < 1")
    if len(x) < 2**levels:
        raise TooShort(
            f"series of {len(x)} samples too short for {levels} cascade levels"
        )
    details = []
    approx = x
    for _ in range(levels):
        approx, detail = haar_step(approx)
        details.append(detail)
    return approx, details


def dwt_features(x, levels: int | None = None) -> np.ndarray:
    """Per-band summary vector of length 3 * levels + 3.

    Per detail band, finest first: log(1 + energy), mean absolute
    coefficient, population standard deviation.  Then for the final
    approximation: mean, standard deviation, log(1 + energy).
    """
    approx, details = haar_dwt(x, levels)
    feats = []
    for d in details:
        feats.extend([np.log1p(np.sum(d * d)), np.mean(np.abs(d)), np.std(d)])
    feats.extend([np.mean(approx), np.std(approx), np.log1p(np.sum(approx * approx))])
    return np.array(feats, dtype=np.float64)


def features_matrix(series: list[np.ndarray], levels: int | None = None) -> np.ndarray:
    """Stack per-channel feature vectors for (time, channels) samples.

    With no explicit depth, one is resolved from the shortest series so
    every sample yields the same vector length.
    """
    if not len(series):
        raise EmptyDataset("no samples to extract features from")
    if levels is None:
        levels = default_levels(min(np.asarray(s).shape[0] for s in series))
    n_channels = np.asarray(series[0]).shape[1]
    rows = []
    for i, sample in enumerate(series):
        sample = np.asarray(sample, dtype=np.float64)
        if sample.ndim != 2:
            raise InconsistentF(f"sample {i}: expected 2-D time-by-channels array")
        if sample.shape[1] != n_channels:
            raise InconsistentF(
                f"sample {i}: {sample.shape[1]} channels, expected {n_channels}"
            )
        rows.append(
            np.concatenate(
                [dwt_features(sample[:, ch], levels) for ch in range(n_channels)]
            )
        )
    return np.stack(rows)


class HaarFeatureExtractor(BaseEstimator, TransformerMixin):
    """Transformer wrapper around :func:`features_matrix`.

    The cascade depth is frozen at fit time (resolved from the training
    series when ``levels`` is None) so train and test vectors always
    align.
    """

    def __init__(self, levels: int | None = None):
        self.levels = levels

    def fit(self, series, y=None) -> "HaarFeatureExtractor":
        if self.levels is None:
            self.levels_ = default_levels(min(np.asarray(s).shape[0] for s in series))
        else:
            self.levels_ = self.levels
        matrix = features_matrix(series, self.levels_)
        self.n_channels_ = np.asarray(series[0]).shape[1]
        self.n_features_out_ = matrix.shape[1]
        return self

    def transform(self, series) -> np.ndarray:
        check_fitted(self, "n_channels_")
        if np.asarray(series[0]).shape[1] != self.n_channels_:
            raise DimMismatch(
                f"fitted on {self.n_channels_}-channel samples, "
                f"got {np.asarray(series[0]).shape[1]}"
            )
        return features_matrix(series, self.levels_)
