"""Labeled activity dataset files.

One sample per line: ``label|v,v;v,v;...`` — the label, a pipe, then the
time steps separated by semicolons, each holding the comma-separated
channel values for that instant.  Series length may vary between
samples; the channel count must not.  In memory a sample is a
time-by-channels float array.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..exceptions import (
    EmptyDataset,
    InconsistentF,
    MalformedLine,
    UnknownLabel,
)

# the fixed six-activity vocabulary, alphabetical; class indices
# everywhere in this package are positions in this tuple
LABELS: tuple[str, ...] = ("lie_down", "pick_up", "run", "sit", "stand_up", "walk")
LABEL_TO_INDEX = {label: i for i, label in enumerate(LABELS)}

MIN_TIME_STEPS = 8


def parse_line(line: str, line_number: int = 0) -> tuple[str, np.ndarray]:
    """One dataset line -> (label, time-by-channels float array)."""
    if "|" not in line:
        raise MalformedLine(
            f"line {line_number}: missing 'label|series' separator", line_number
        )
    label, _, body = line.partition("|")
    label = label.strip()
    if label not in LABEL_TO_INDEX:
        raise UnknownLabel(f"line {line_number}: unknown label {label!r}")
    steps = []
    for chunk in body.split(";"):
        values = []
        for token in chunk.split(","):
            try:
                v = float(token)
            except ValueError:
                raise MalformedLine(
                    f"line {line_number}: bad value {token.strip()!r}", line_number
                ) from None
            if not math.isfinite(v):
                raise MalformedLine(
                    f"line {line_number}: non-finite value {token.strip()!r}",
                    line_number,
                )
            values.append(v)
        steps.append(values)
    widths = {len(step) for step in steps}
    if len(widths) != 1 or 0 in widths:
        raise MalformedLine(
            f"line {line_number}: ragged or empty time steps", line_number
        )
    if len(steps) < MIN_TIME_STEPS:
        raise MalformedLine(
            f"line {line_number}: {len(steps)} time steps, minimum is "
            f"{MIN_TIME_STEPS}",
            line_number,
        )
    return label, np.array(steps, dtype=np.float64)


def load_dataset(path) -> tuple[list[str], list[np.ndarray]]:
    """Read a dataset file; blank lines are skipped.

    Returns parallel lists of labels and (time, channels) arrays.  All
    samples must agree on the channel count; lengths may differ.
    """
    labels: list[str] = []
    series: list[np.ndarray] = []
    n_channels = None
    with open(Path(path), "r", encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            label, sample = parse_line(line, line_number)
            if n_channels is None:
                n_channels = sample.shape[1]
            elif sample.shape[1] != n_channels:
                raise InconsistentF(
                    f"line {line_number}: {sample.shape[1]} channels, "
                    f"expected {n_channels}"
                )
            labels.append(label)
            series.append(sample)
    if not labels:
        raise EmptyDataset(f"{path}: no samples")
    return labels, series


def format_line(label: str, sample: np.ndarray) -> str:
    if label not in LABEL_TO_INDEX:
        raise UnknownLabel(f"unknown label {label!r}")
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim != 2:
        raise InconsistentF(f"expected a 2-D time-by-channels array for {label!r}")
    body = ";".join(",".join(repr(float(v)) for v in step) for step in sample)
    return f"{label}|{body}"


def write_dataset(path, samples: Iterable[tuple[str, np.ndarray]]) -> int:
    """Write (label, series) pairs to a dataset file; returns the count."""
    count = 0
    with open(Path(path), "w", encoding="utf-8") as fh:
        for label, sample in samples:
            fh.write(format_line(label, sample) + "\n")
            count += 1
    return count


def labels_to_indices(labels: Sequence[str]) -> np.ndarray:
    """Class indices in the fixed vocabulary order."""
    try:
        return np.array([LABEL_TO_INDEX[label] for label in labels], dtype=int)
    except KeyError as exc:
        raise UnknownLabel(f"unknown label {exc.args[0]!r}") from None
