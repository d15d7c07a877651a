"""SVM inputs built from fitted piecewise coefficients, and z-score scaling."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidParameter, ZeroVariance
from .piecewise import LinearFit, QuadFit

FEATURE_LENGTH = {"linear": 3, "quadratic": 6}


@dataclass
class FeatureVector:
    values: np.ndarray
    kind: str
    label: Optional[int] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.kind not in FEATURE_LENGTH:
            raise InvalidParameter(f"unknown feature kind {self.kind!r}")
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameter("feature values must be finite")


def features_linear(fit: LinearFit, label=None) -> FeatureVector:
    """Slopes ``(s_1, ..., s_k)`` in piece order; intercepts are left out."""
    return FeatureVector(fit.slopes.copy(), "linear", label)


def features_quadratic(fit: QuadFit, label=None) -> FeatureVector:
    """``(m_1, n_1, m_2, n_2, ...)``; the constant terms are left out."""
    return FeatureVector(fit.coeffs[:, :2].ravel(), "quadratic", label)


def features_from_fit(fit, label=None) -> FeatureVector:
    if isinstance(fit, QuadFit):
        return features_quadratic(fit, label)
    return features_linear(fit, label)


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.mean.shape[0]:
            raise DimensionMismatch(f"scaler expects {self.mean.shape[0]} features, got {X.shape[-1]}")
        return (X - self.mean) / self.std

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["mean"], dtype=float), np.asarray(data["std"], dtype=float))


def fit_scaler(vectors: Sequence) -> Scaler:
    """Per-dimension mean and population standard deviation."""
    X = np.asarray([getattr(v, "values", v) for v in vectors], dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InvalidParameter("need at least two training vectors")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    for d, s in enumerate(std):
        if not s > 1e-12 * max(1.0, abs(mean[d])):
            raise ZeroVariance(d)
    return Scaler(mean, std)


def apply_scaler(scaler: Scaler, vector):
    if isinstance(vector, FeatureVector):
        return FeatureVector(scaler.transform(vector.values), vector.kind, vector.label)
    return scaler.transform(vector)
