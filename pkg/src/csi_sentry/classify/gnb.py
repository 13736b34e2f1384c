"""Gaussian naive Bayes over feature vectors.

Per class and feature, fit a univariate Gaussian by mean and population
variance; predictions maximize log prior plus summed log likelihood.
Every variance gets a floor of 1e-9 times the largest total feature
variance so constant features cannot produce divisions by zero.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..exceptions import DimMismatch, EmptyDataset
from ..validation import as_float_matrix, check_fitted

VAR_FLOOR_RATIO = 1e-9


class GaussianNaiveBayesActivityClassifier(BaseEstimator, ClassifierMixin):
    def fit(self, X, y) -> "GaussianNaiveBayesActivityClassifier":
        X = as_float_matrix(X, "X")
        y = np.asarray(y)
        if len(X) == 0:
            raise EmptyDataset("cannot fit on zero samples")
        if len(X) != len(y):
            raise DimMismatch(f"{len(X)} samples but {len(y)} labels")
        self.classes_ = np.unique(y)
        self.n_features_in_ = X.shape[1]
        k = len(self.classes_)
        self.priors_ = np.empty(k)
        self.means_ = np.empty((k, X.shape[1]))
        self.vars_ = np.empty((k, X.shape[1]))
        for j, cls in enumerate(self.classes_):
            rows = X[y == cls]
            self.priors_[j] = len(rows) / len(X)
            self.means_[j] = rows.mean(axis=0)
            self.vars_[j] = rows.var(axis=0)  # population variance
        self.epsilon_ = VAR_FLOOR_RATIO * float(X.var(axis=0).max())
        if self.epsilon_ <= 0.0:
            self.epsilon_ = VAR_FLOOR_RATIO
        self.vars_ += self.epsilon_
        return self

    def _check_input(self, X) -> np.ndarray:
        check_fitted(self, "means_")
        X = as_float_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise DimMismatch(
                f"model expects {self.n_features_in_} features, got {X.shape[1]}"
            )
        return X

    def _joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        # (n, k): log P(class) + sum_f log N(x_f; mean, var)
        diff = X[:, None, :] - self.means_[None, :, :]
        log_like = -0.5 * (
            np.log(2.0 * np.pi * self.vars_)[None, :, :]
            + diff**2 / self.vars_[None, :, :]
        ).sum(axis=2)
        return np.log(self.priors_)[None, :] + log_like

    def predict_log_proba(self, X) -> np.ndarray:
        joint = self._joint_log_likelihood(self._check_input(X))
        norm = np.logaddexp.reduce(joint, axis=1, keepdims=True)
        return joint - norm

    def predict_proba(self, X) -> np.ndarray:
        return np.exp(self.predict_log_proba(X))

    def predict(self, X) -> np.ndarray:
        joint = self._joint_log_likelihood(self._check_input(X))
        return self.classes_[np.argmax(joint, axis=1)]
