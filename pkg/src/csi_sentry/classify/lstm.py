"""Recurrent activity classifier: a single-layer LSTM written on numpy.

Sequences are time-by-channels arrays, standardized per channel with
statistics frozen at fit time, and read out from the final hidden state
through a dense softmax layer over the full six-activity vocabulary
(one output slot per label, in the fixed alphabetical order).  Training
is full backpropagation through time with Adam, a global gradient-norm
clip, inverted dropout on the readout, and batches bucketed by sequence
length so every batch stacks into one rectangular array.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..exceptions import DimMismatch, EmptyDataset, InconsistentF
from ..validation import check_fitted
from .dataset import LABELS, labels_to_indices

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def init_params(
    n_inputs: int, hidden_size: int, n_classes: int, rng: np.random.Generator
) -> dict[str, np.ndarray]:
    """Xavier-uniform weights; forget-gate bias starts at +1."""
    h = hidden_size
    fan_in = n_inputs + h
    limit_w = np.sqrt(6.0 / (fan_in + h))
    params = {
        "W": rng.uniform(-limit_w, limit_w, size=(4 * h, fan_in)),
        "b": np.zeros(4 * h),
        "V": rng.uniform(
            -np.sqrt(6.0 / (h + n_classes)),
            np.sqrt(6.0 / (h + n_classes)),
            size=(n_classes, h),
        ),
        "c": np.zeros(n_classes),
    }
    params["b"][h : 2 * h] += 1.0
    return params


def _forward(
    params: dict[str, np.ndarray], X: np.ndarray
) -> tuple[np.ndarray, list[tuple]]:
    """Run the recurrence over X (batch, time, inputs); returns (h_T, caches)."""
    W, b = params["W"], params["b"]
    h = W.shape[0] // 4
    B, T, _ = X.shape
    hidden = np.zeros((B, h))
    cell = np.zeros((B, h))
    caches = []
    for t in range(T):
        zin = np.concatenate([X[:, t, :], hidden], axis=1)
        z = zin @ W.T + b
        gi = _sigmoid(z[:, :h])
        gf = _sigmoid(z[:, h : 2 * h])
        gg = np.tanh(z[:, 2 * h : 3 * h])
        go = _sigmoid(z[:, 3 * h :])
        new_cell = gf * cell + gi * gg
        caches.append((zin, gi, gf, gg, go, cell, new_cell))
        cell = new_cell
        hidden = go * np.tanh(new_cell)
    return hidden, caches


def loss_and_grads(
    params: dict[str, np.ndarray],
    X: np.ndarray,
    y_idx: np.ndarray,
    dropout_mask: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch plus gradients for every weight."""
    W, V, c = params["W"], params["V"], params["c"]
    h = W.shape[0] // 4
    B, _, n_inputs = X.shape
    hidden, caches = _forward(params, X)
    readout = hidden if dropout_mask is None else hidden * dropout_mask
    probs = _softmax(readout @ V.T + c)
    loss = float(-np.mean(np.log(probs[np.arange(B), y_idx] + 1e-300)))

    dlogits = probs.copy()
    dlogits[np.arange(B), y_idx] -= 1.0
    dlogits /= B
    grads = {
        "V": dlogits.T @ readout,
        "c": dlogits.sum(axis=0),
        "W": np.zeros_like(W),
        "b": np.zeros_like(params["b"]),
    }
    dh = dlogits @ V
    if dropout_mask is not None:
        dh = dh * dropout_mask
    dcell = np.zeros((B, h))
    for zin, gi, gf, gg, go, cell_prev, cell in reversed(caches):
        tanh_c = np.tanh(cell)
        dc_total = dcell + dh * go * (1.0 - tanh_c**2)
        dz = np.concatenate(
            [
                dc_total * gg * gi * (1.0 - gi),  # input gate
                dc_total * cell_prev * gf * (1.0 - gf),  # forget gate
                dc_total * gi * (1.0 - gg**2),  # candidate
                dh * tanh_c * go * (1.0 - go),  # output gate
            ],
            axis=1,
        )
        grads["W"] += dz.T @ zin
        grads["b"] += dz.sum(axis=0)
        dzin = dz @ W
        dh = dzin[:, n_inputs:]
        dcell = dc_total * gf
    return loss, grads


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their joint L2 norm is <= max_norm."""
    total = np.sqrt(sum(float((g**2).sum()) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


class LstmActivityClassifier(BaseEstimator, ClassifierMixin):
    """Sequence classifier on raw time-by-channels series."""

    def __init__(
        self,
        hidden_size: int = 32,
        epochs: int = 150,
        learning_rate: float = 1e-3,
        batch_size: int = 16,
        dropout: float = 0.5,
        clip_norm: float = 5.0,
        random_state: int | None = None,
    ):
        self.hidden_size = hidden_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.dropout = dropout
        self.clip_norm = clip_norm
        self.random_state = random_state

    # -- data plumbing ---------------------------------------------------

    def _validated(self, sequences, expected_channels: int | None) -> list:
        out = []
        for i, seq in enumerate(sequences):
            seq = np.asarray(seq, dtype=np.float64)
            if seq.ndim != 2 or seq.shape[0] < 1 or seq.shape[1] < 1:
                raise InconsistentF(f"sample {i}: expected a time-by-channels array")
            if not np.all(np.isfinite(seq)):
                raise ValueError(f"sample {i}: non-finite values")
            if expected_channels is not None and seq.shape[1] != expected_channels:
                raise DimMismatch(
                    f"sample {i}: {seq.shape[1]} channels, expected {expected_channels}"
                )
            out.append(seq)
        return out

    def _standardize(self, seq: np.ndarray) -> np.ndarray:
        return (seq - self.input_mean_) / self.input_std_

    # -- training ----------------------------------------------------------

    def fit(self, sequences, y) -> "LstmActivityClassifier":
        if len(sequences) == 0:
            raise EmptyDataset("cannot fit on zero sequences")
        if len(sequences) != len(y):
            raise DimMismatch(f"{len(sequences)} sequences but {len(y)} labels")
        seqs = self._validated(sequences, None)
        first_channels = seqs[0].shape[1]
        for i, s in enumerate(seqs):
            if s.shape[1] != first_channels:
                raise InconsistentF(
                    f"sample {i}: {s.shape[1]} channels, expected {first_channels}"
                )
        self.n_features_in_ = first_channels
        # one output slot per vocabulary label, fixed alphabetical order
        self.classes_ = np.array(LABELS)
        y_idx = labels_to_indices(y)

        stacked = np.concatenate(seqs, axis=0)
        self.input_mean_ = stacked.mean(axis=0)
        self.input_std_ = np.maximum(stacked.std(axis=0), 1e-8)
        seqs = [self._standardize(s) for s in seqs]

        rng = np.random.default_rng(self.random_state)
        params = init_params(first_channels, self.hidden_size, len(self.classes_), rng)
        moments = {k: (np.zeros_like(v), np.zeros_like(v)) for k, v in params.items()}
        step = 0

        by_length: dict[int, list[int]] = {}
        for i, s in enumerate(seqs):
            by_length.setdefault(len(s), []).append(i)

        self.loss_history_ = []
        for _ in range(self.epochs):
            batches = []
            for indices in by_length.values():
                indices = np.array(indices)
                rng.shuffle(indices)
                for start in range(0, len(indices), self.batch_size):
                    batches.append(indices[start : start + self.batch_size])
            rng.shuffle(batches)
            total_loss = 0.0
            for batch in batches:
                X = np.stack([seqs[i] for i in batch])
                targets = y_idx[batch]
                mask = None
                if self.dropout > 0.0:
                    keep = rng.random((len(batch), self.hidden_size)) >= self.dropout
                    mask = keep / (1.0 - self.dropout)
                loss, grads = loss_and_grads(params, X, targets, mask)
                clip_global_norm(grads, self.clip_norm)
                step += 1
                for key, grad in grads.items():
                    m, v = moments[key]
                    m *= ADAM_BETA1
                    m += (1.0 - ADAM_BETA1) * grad
                    v *= ADAM_BETA2
                    v += (1.0 - ADAM_BETA2) * grad**2
                    m_hat = m / (1.0 - ADAM_BETA1**step)
                    v_hat = v / (1.0 - ADAM_BETA2**step)
                    params[key] -= (
                        self.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
                    )
                total_loss += loss * len(batch)
            self.loss_history_.append(total_loss / len(seqs))
        self.params_ = params
        return self

    # -- inference -----------------------------------------------------

    def predict_proba(self, sequences) -> np.ndarray:
        check_fitted(self, "params_")
        seqs = self._validated(sequences, self.n_features_in_)
        probs = np.empty((len(seqs), len(self.classes_)))
        by_length: dict[int, list[int]] = {}
        for i, s in enumerate(seqs):
            by_length.setdefault(len(s), []).append(i)
        for indices in by_length.values():
            X = np.stack([self._standardize(seqs[i]) for i in indices])
            hidden, _ = _forward(self.params_, X)
            probs[indices] = _softmax(hidden @ self.params_["V"].T + self.params_["c"])
        return probs

    def predict(self, sequences) -> np.ndarray:
        proba = self.predict_proba(sequences)
        return self.classes_[np.argmax(proba, axis=1)]
