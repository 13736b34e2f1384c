"""Evaluation helpers: confusion matrix and per-class scores."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..exceptions import EmptyDataset
from .dataset import LABELS


def confusion_matrix(
    y_true: Sequence, y_pred: Sequence, labels: Sequence = LABELS
) -> np.ndarray:
    """Counts with true classes as rows and predicted classes as columns."""
    index = {label: i for i, label in enumerate(labels)}
    matrix = np.zeros((len(labels), len(labels)), dtype=int)
    for t, p in zip(y_true, y_pred):
        matrix[index[t], index[p]] += 1
    return matrix


def evaluate(y_true: Sequence, y_pred: Sequence, labels: Sequence = LABELS) -> dict:
    """Accuracy, confusion matrix, and per-class precision/recall/F1."""
    if len(y_true) == 0:
        raise EmptyDataset("nothing to evaluate")
    if len(y_true) != len(y_pred):
        raise ValueError(f"{len(y_true)} true labels but {len(y_pred)} predictions")
    matrix = confusion_matrix(y_true, y_pred, labels)
    total = matrix.sum()
    per_class = {}
    f1s = []
    for i, label in enumerate(labels):
        tp = matrix[i, i]
        precision = tp / matrix[:, i].sum() if matrix[:, i].sum() else 0.0
        recall = tp / matrix[i, :].sum() if matrix[i, :].sum() else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        per_class[label] = {
            "precision": float(precision),
            "recall": float(recall),
            "f1": float(f1),
            "support": int(matrix[i, :].sum()),
        }
        f1s.append(f1)
    return {
        "accuracy": float(np.trace(matrix) / total) if total else 0.0,
        "macro_f1": float(np.mean(f1s)),
        "confusion": matrix,
        "per_class": per_class,
    }
