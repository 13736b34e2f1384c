"""Shape-library anomaly detection on amplitude series.

Training learns k typical segment shapes (k-means over half-sine
windowed, overlapping segments) plus the statistics of the residual
between a series and its reconstruction from those shapes.  Detection
flags samples whose smoothed squared residual exceeds
mean + c * std of the training residual.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .dsp import moving_average
from .exceptions import TooFew, TooFewSegments, TooShort
from .validation import as_float_vector, check_fitted

LIBRARY_MAGIC = b"CSKM"
LIBRARY_VERSION = 1
_LIBRARY_HEADER = struct.Struct("<4sHIIIdd")


def half_sine_window(length: int) -> np.ndarray:
    """Half-sine taper with exact zeros at both endpoints."""
    if length < 2:
        raise ValueError(f"window length {length} < 2")
    w = np.sin(np.pi * np.arange(length) / (length - 1))
    w[0] = 0.0
    w[-1] = 0.0
    return w


def segment_positions(n: int, segment_len: int, stride: int) -> np.ndarray:
    """Start indices 0, stride, 2*stride, ... of fully contained segments."""
    if n < segment_len:
        raise TooShort(f"series of {n} samples is shorter than one {segment_len}-sample segment")
    return np.arange(0, n - segment_len + 1, stride)


def segment_and_window(
    x: np.ndarray, segment_len: int, stride: int
) -> tuple[np.ndarray, np.ndarray]:
    """Overlapping windowed segments as rows, plus their start indices."""
    positions = segment_positions(len(x), segment_len, stride)
    w = half_sine_window(segment_len)
    segments = np.stack([x[p : p + segment_len] * w for p in positions])
    return segments, positions


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    inertia_history: list[float] = field(default_factory=list)
    n_iter: int = 0


def _plus_plus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: D^2-weighted draws after a uniform first pick."""
    n = len(X)
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))  # all points coincide with a centroid
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = X[idx]
        d2 = np.minimum(d2, ((X - centroids[j]) ** 2).sum(axis=1))
    return centroids


def kmeans_fit(
    X: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iters: int = 100,
    tol: float = 1e-6,
) -> KMeansResult:
    """Lloyd's algorithm from a k-means++ start.

    Ties in assignment go to the lowest cluster index; a cluster left
    empty is reseeded to the point farthest from its own centroid
    (distinct points when several clusters empty at once).  Iteration
    stops when the largest per-centroid shift falls below ``tol`` or at
    ``max_iters``, then one final assignment syncs labels to centroids.
    """
    n = len(X)
    if k < 1:
        raise ValueError(f"k {k} < 1")
    if n < k:
        raise TooFewSegments(f"{n} segments cannot seed {k} clusters")
    centroids = _plus_plus_init(X, k, rng)
    history: list[float] = []

    def assign(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d2 = ((X[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        own = d2[np.arange(n), labels]
        history.append(float(own.sum()))
        return labels, own

    n_iter = 0
    for _ in range(max_iters):
        labels, own = assign(centroids)
        counts = np.bincount(labels, minlength=k)
        new_centroids = centroids.copy()
        for j in range(k):
            if counts[j] > 0:
                new_centroids[j] = X[labels == j].mean(axis=0)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            farthest = np.argsort(own)[::-1]
            for j, idx in zip(empties, farthest):
                new_centroids[j] = X[idx]
        shift = float(
            np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        )
        centroids = new_centroids
        n_iter += 1
        if shift < tol:
            break
    labels, _ = assign(centroids)
    return KMeansResult(centroids, labels, history, n_iter)


def reconstruct(
    x: np.ndarray, centroids: np.ndarray, segment_len: int, stride: int
) -> np.ndarray:
    """Overlap-add the nearest library shape for every segment.

    Accumulated shapes are normalized by the accumulated window; samples
    the windows never reach (weight < 1e-6) keep their original value.
    """
    segments, positions = segment_and_window(x, segment_len, stride)
    d2 = ((segments[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    nearest = d2.argmin(axis=1)
    w = half_sine_window(segment_len)
    recon = np.zeros_like(x)
    wsum = np.zeros_like(x)
    for p, j in zip(positions, nearest):
        recon[p : p + segment_len] += centroids[j]
        wsum[p : p + segment_len] += w
    covered = wsum >= 1e-6
    recon[covered] /= wsum[covered]
    recon[~covered] = x[~covered]
    return recon


def smoothed_squared_error(
    x: np.ndarray, recon: np.ndarray, window: int
) -> np.ndarray:
    return moving_average((x - recon) ** 2, window=window)


def calibrate_threshold(errors: np.ndarray, c: float) -> tuple[float, float, float]:
    """(mean, population std, mean + c * std) of a residual series."""
    if len(errors) < 2:
        raise TooFew(f"{len(errors)} residual samples cannot calibrate a threshold")
    mean = float(np.mean(errors))
    std = float(np.std(errors))
    return mean, std, mean + c * std


def find_intervals(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal True runs as inclusive (start, end) index pairs."""
    intervals: list[tuple[int, int]] = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            intervals.append((start, i - 1))
            start = None
    if start is not None:
        intervals.append((start, len(mask) - 1))
    return intervals


@dataclass
class AnomalyReport:
    mask: np.ndarray
    error: np.ndarray
    threshold: float
    intervals: list[tuple[int, int]]


class ShapeAnomalyDetector(BaseEstimator):
    """Detects amplitude segments that no learned shape reconstructs well.

    Parameters
    ----------
    segment_len : window/segment length L (samples)
    stride : hop between segments; None means L // 2
    n_clusters : number of library shapes
    threshold_c : flag where residual > mean + c * std
    """

    def __init__(
        self,
        segment_len: int = 64,
        stride: int | None = None,
        n_clusters: int = 8,
        max_iters: int = 100,
        tol: float = 1e-6,
        threshold_c: float = 3.0,
        random_state: int | None = None,
    ):
        self.segment_len = segment_len
        self.stride = stride
        self.n_clusters = n_clusters
        self.max_iters = max_iters
        self.tol = tol
        self.threshold_c = threshold_c
        self.random_state = random_state

    def _resolved(self) -> tuple[int, int]:
        if self.segment_len < 4:
            raise ValueError(f"segment_len {self.segment_len} < 4")
        stride = self.segment_len // 2 if self.stride is None else self.stride
        if not (2 <= stride <= self.segment_len):
            raise ValueError(
                f"stride {stride} outside 2..segment_len ({self.segment_len})"
            )
        if self.n_clusters < 1:
            raise ValueError(f"n_clusters {self.n_clusters} < 1")
        return self.segment_len, stride

    def fit(self, x, y=None) -> "ShapeAnomalyDetector":
        x = as_float_vector(x, "x")
        segment_len, stride = self._resolved()
        segments, _ = segment_and_window(x, segment_len, stride)
        rng = np.random.default_rng(self.random_state)
        result = kmeans_fit(segments, self.n_clusters, rng, self.max_iters, self.tol)
        self.stride_ = stride
        self.centroids_ = result.centroids
        self.inertia_history_ = result.inertia_history
        self.n_iter_ = result.n_iter
        recon = reconstruct(x, self.centroids_, segment_len, stride)
        errors = smoothed_squared_error(x, recon, segment_len)
        self.error_mean_, self.error_std_, self.threshold_ = calibrate_threshold(
            errors, self.threshold_c
        )
        return self

    def score_samples(self, x) -> np.ndarray:
        """Smoothed squared reconstruction error per sample."""
        check_fitted(self, "centroids_")
        x = as_float_vector(x, "x")
        recon = reconstruct(x, self.centroids_, self.segment_len, self.stride_)
        return smoothed_squared_error(x, recon, self.segment_len)

    def detect(self, x) -> AnomalyReport:
        error = self.score_samples(x)
        threshold = self.error_mean_ + self.threshold_c * self.error_std_
        mask = error > threshold
        return AnomalyReport(mask, error, threshold, find_intervals(mask))

    def predict(self, x) -> np.ndarray:
        """1 where anomalous, 0 where the shape library explains the data."""
        return self.detect(x).mask.astype(int)


def save_library(path, detector: ShapeAnomalyDetector) -> None:
    """Write the fitted shape library in its binary interchange format."""
    check_fitted(detector, "centroids_")
    k, segment_len = detector.centroids_.shape
    header = _LIBRARY_HEADER.pack(
        LIBRARY_MAGIC,
        LIBRARY_VERSION,
        segment_len,
        detector.stride_,
        k,
        detector.error_mean_,
        detector.error_std_,
    )
    Path(path).write_bytes(
        header + np.ascontiguousarray(detector.centroids_, dtype="<f8").tobytes()
    )


def write_report_csv(path, report: AnomalyReport) -> int:
    """Export a detection run as sample_idx,error,above_threshold rows."""
    with open(Path(path), "w", encoding="utf-8") as fh:
        fh.write("sample_idx,error,above_threshold\n")
        for i, (err, flag) in enumerate(zip(report.error, report.mask)):
            fh.write(f"{i},{float(err)!r},{int(flag)}\n")
    return len(report.error)


def load_library(path, threshold_c: float = 3.0) -> ShapeAnomalyDetector:
    data = Path(path).read_bytes()
    if len(data) < _LIBRARY_HEADER.size:
        raise ValueError(f"{path}: too short for a shape library header")
    magic, version, segment_len, stride, k, mean, std = _LIBRARY_HEADER.unpack_from(
        data
    )
    if magic != LIBRARY_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != LIBRARY_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    expected = _LIBRARY_HEADER.size + k * segment_len * 8
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    detector = ShapeAnomalyDetector(
        segment_len=segment_len, stride=stride, n_clusters=k, threshold_c=threshold_c
    )
    detector.stride_ = stride
    detector.centroids_ = (
        np.frombuffer(data, dtype="<f8", offset=_LIBRARY_HEADER.size)
        .reshape(k, segment_len)
        .astype(np.float64)
    )
    detector.inertia_history_ = []
    detector.n_iter_ = 0
    detector.error_mean_ = mean
    detector.error_std_ = std
    detector.threshold_ = mean + threshold_c * std
    return detector
