"""Soft-margin kernel SVM trained with SMO, composed one-vs-one for many classes.

Decision function of a binary model::

    f(x) = sum_i dual_coef_i * K(sv_i, x) - bias,   dual_coef_i = alpha_i * y_i

and the predicted label is ``sign(f(x))``.
"""
from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import (
    DimensionMismatch,
    InvalidParameter,
    MalformedModel,
    NoConvergence,
    SingleClass,
    VersionMismatch,
)
from .features import Scaler

MODEL_VERSION = 1
KINDS = {"linear": _kernels.KERNEL_LINEAR, "polynomial": _kernels.KERNEL_POLY,
         "gaussian": _kernels.KERNEL_GAUSSIAN}


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "gaussian"
    degree: int = 3
    coef0: float = 1.0
    gamma: Optional[float] = None  # None: resolved from training data

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameter(f"unknown kernel {self.kind!r}")
        if int(self.degree) != self.degree or self.degree < 1:
            raise InvalidParameter("degree must be an integer >= 1")
        if self.gamma is not None and not self.gamma > 0:
            raise InvalidParameter("gamma must be > 0")

    def resolved(self, X) -> "KernelSpec":
        """Fill in ``gamma = 1 / (d * var(X))`` if it was left unset."""
        if self.gamma is not None or self.kind != "gaussian":
            return self
        X = np.asarray(X, dtype=float)
        var = float(X.var()) if X.size else 0.0
        gamma = 1.0 / (X.shape[1] * var) if var > 0 else 1.0
        return KernelSpec(self.kind, self.degree, self.coef0, gamma)

    def to_dict(self):
        return {"kind": self.kind, "degree": int(self.degree), "coef0": float(self.coef0),
                "gamma": None if self.gamma is None else float(self.gamma)}


def gram_matrix(spec: KernelSpec, X1, X2) -> np.ndarray:
    X1 = np.ascontiguousarray(np.atleast_2d(np.asarray(X1, dtype=float)))
    X2 = np.ascontiguousarray(np.atleast_2d(np.asarray(X2, dtype=float)))
    if X1.shape[1] != X2.shape[1]:
        raise DimensionMismatch(f"dimension {X1.shape[1]} vs {X2.shape[1]}")
    gamma = 1.0 if spec.gamma is None else float(spec.gamma)
    return _kernels.gram(X1, X2, KINDS[spec.kind], gamma, float(spec.degree), float(spec.coef0))


def kernel_eval(spec: KernelSpec, x1, x2) -> float:
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x1.shape != x2.shape:
        raise DimensionMismatch(f"dimension {x1.size} vs {x2.size}")
    return float(gram_matrix(spec, x1[None, :], x2[None, :])[0, 0])


@dataclass
class BinarySvm:
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel: KernelSpec
    C: float
    support_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    converged: bool = True
    n_iter: int = 0

    @property
    def alphas(self) -> np.ndarray:
        return np.abs(self.dual_coefs)

    def to_dict(self):
        return {"support_vectors": self.support_vectors.tolist(),
                "dual_coefs": self.dual_coefs.tolist(),
                "bias": float(self.bias),
                "converged": bool(self.converged)}


def train_binary_svm(X, y, kernel: KernelSpec = KernelSpec(), C: float = 10.0,
                     tol: float = 1e-3, max_passes: int = 200, K=None) -> BinarySvm:
    """SMO on the soft-margin dual with second-order working-pair selection.

    ``y`` holds +1/-1 labels. Training stops once the maximal KKT violation
    drops below ``tol``; after ``max_passes * n`` pair updates the model is
    returned anyway with ``converged=False`` and a ``NoConvergence`` warning.
    A precomputed Gram matrix may be passed as ``K``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch("X must be (n, d) with one label per row")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidParameter("labels must be +1 or -1")
    if np.all(y == y[0]):
        raise SingleClass("both classes must be present")
    if not C > 0:
        raise InvalidParameter("C must be > 0")
    kernel = kernel.resolved(X)
    if K is None:
        K = gram_matrix(kernel, X, X)
    # orient so the first sample is +1: flipping every label then gives an
    # identical optimization and exactly negated outputs
    sign = y[0]
    y_c = np.ascontiguousarray(y * sign)
    n = y.shape[0]
    alpha, rho, n_iter, converged = _kernels.smo(
        np.ascontiguousarray(K, dtype=float), y_c, float(C), float(tol), int(max_passes) * max(n, 1)
    )
    if not converged:
        warnings.warn(f"SMO stopped after {n_iter} updates without meeting tol={tol}",
                      NoConvergence, stacklevel=2)
    sv = np.flatnonzero(alpha > 0)
    return BinarySvm(X[sv].copy(), alpha[sv] * y[sv], float(rho * sign), kernel, float(C),
                     sv, bool(converged), int(n_iter))


def decision_value(model: BinarySvm, x):
    """``sum_i dual_coef_i K(sv_i, x) - bias`` for one vector or a batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if model.support_vectors.shape[0] == 0:
        out = np.full(X.shape[0], -model.bias)
    else:
        if X.shape[1] != model.support_vectors.shape[1]:
            raise DimensionMismatch(
                f"model expects {model.support_vectors.shape[1]} features, got {X.shape[1]}")
        out = gram_matrix(model.kernel, X, model.support_vectors) @ model.dual_coefs - model.bias
    return float(out[0]) if single else out


def dual_objective(alpha, y, K) -> float:
    """``sum(alpha) - 0.5 * sum_ij alpha_i alpha_j y_i y_j K_ij``."""
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ np.asarray(K) @ ay)


# ---------------------------------------------------------------------------
# one-vs-one
# ---------------------------------------------------------------------------

@dataclass
class MulticlassSvmModel:
    labels: list
    pairs: list  # [(label_pos, label_neg, BinarySvm)], label_pos < label_neg
    kernel: KernelSpec
    C: float
    tol: float
    scaler: Optional[Scaler] = None
    metadata: dict = field(default_factory=dict)

    def decision_matrix(self, X) -> np.ndarray:
        """Raw inputs in, ``(n_samples, n_pairs)`` pairwise decision values out."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.scaler is not None:
            X = self.scaler.transform(X)
        return np.column_stack([decision_value(m, X) for _, _, m in self.pairs])

    def predict(self, X):
        return predict(self, X)


def train_multiclass(X, labels, kernel: KernelSpec = KernelSpec(), C: float = 10.0,
                     tol: float = 1e-3, max_passes: int = 200,
                     scaler: Optional[Scaler] = None, metadata: Optional[dict] = None) -> MulticlassSvmModel:
    """One binary SVM per unordered label pair.

    ``X`` is raw; when ``scaler`` is given it is applied here and stored with
    the model so prediction applies it exactly once.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    classes = sorted(int(c) for c in np.unique(labels))
    if len(classes) < 2:
        raise SingleClass("need at least two classes")
    Xs = scaler.transform(X) if scaler is not None else X
    kernel = kernel.resolved(Xs)
    K = gram_matrix(kernel, Xs, Xs)
    pairs = []
    for a, b in itertools.combinations(classes, 2):
        idx = np.flatnonzero((labels == a) | (labels == b))
        y = np.where(labels[idx] == a, 1.0, -1.0)
        m = train_binary_svm(Xs[idx], y, kernel, C, tol, max_passes, K=K[np.ix_(idx, idx)])
        m.support_indices = idx[m.support_indices]
        pairs.append((a, b, m))
    return MulticlassSvmModel(classes, pairs, kernel, float(C), float(tol), scaler, dict(metadata or {}))


def predict(model: MulticlassSvmModel, X):
    """Majority vote over pairwise classifiers.

    Ties go to the label with the largest summed |decision value| over the
    pairwise contests it won, then to the smallest label.
    """
    x = np.asarray(X, dtype=float)
    single = x.ndim == 1
    D = model.decision_matrix(x)
    pos = {lab: k for k, lab in enumerate(model.labels)}
    out = []
    for row in D:
        votes = np.zeros(len(model.labels), dtype=np.int64)
        conf = np.zeros(len(model.labels))
        for (a, b, _), d in zip(model.pairs, row):
            w = pos[a] if d > 0 else pos[b]
            votes[w] += 1
            conf[w] += abs(d)
        tied = np.flatnonzero(votes == votes.max())
        best = max(tied, key=lambda k: (conf[k], -model.labels[k]))
        out.append(model.labels[best])
    return out[0] if single else np.asarray(out)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def model_to_dict(model: MulticlassSvmModel) -> dict:
    return {
        "version": MODEL_VERSION,
        "labels": [int(c) for c in model.labels],
        "scaler": None if model.scaler is None else model.scaler.to_dict(),
        "kernel": model.kernel.to_dict(),
        "C": model.C,
        "tol": model.tol,
        "pairs": [dict(labels=[int(a), int(b)], **m.to_dict()) for a, b, m in model.pairs],
        "metadata": model.metadata,
    }


def model_from_dict(data: dict) -> MulticlassSvmModel:
    if not isinstance(data, dict) or "version" not in data:
        raise MalformedModel("model document has no version field")
    if data["version"] != MODEL_VERSION:
        raise VersionMismatch(f"model version {data['version']!r}, expected {MODEL_VERSION}")
    try:
        kernel = KernelSpec(**data["kernel"])
        scaler = None if data["scaler"] is None else Scaler.from_dict(data["scaler"])
        C = float(data["C"])
        pairs = []
        for p in data["pairs"]:
            a, b = (int(v) for v in p["labels"])
            sv = np.asarray(p["support_vectors"], dtype=float)
            coefs = np.asarray(p["dual_coefs"], dtype=float)
            if sv.shape[0] != coefs.shape[0]:
                raise MalformedModel(f"pair {a}/{b}: support vector and coefficient counts differ")
            if sv.size == 0:
                sv = sv.reshape(0, len(scaler.mean) if scaler else 0)
            m = BinarySvm(sv, coefs, float(p["bias"]), kernel, C, converged=bool(p.get("converged", True)))
            pairs.append((a, b, m))
        labels = [int(c) for c in data["labels"]]
        n_pairs = len(labels) * (len(labels) - 1) // 2
        if len(pairs) != n_pairs:
            raise MalformedModel(f"expected {n_pairs} pairwise models, found {len(pairs)}")
        return MulticlassSvmModel(labels, pairs, kernel, C, float(data.get("tol", 1e-3)),
                                  scaler, dict(data.get("metadata", {})))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedModel(f"malformed model document: {exc}") from exc


def save_model(model: MulticlassSvmModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path) -> MulticlassSvmModel:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedModel(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(data)
