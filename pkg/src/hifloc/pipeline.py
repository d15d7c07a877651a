"""End-to-end stages: simulate, ingest, fit, train, eval, plot-data.

Every stage writes deterministic artifacts (sorted JSON keys, exact float
formatting, fixed ordering). Wall-clock timings are kept out of those files
and go to a separate ``timing.json``.
"""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .config import PipelineConfig
from .errors import DimensionMismatch, HifError, TooFewSamples
from .features import features_from_fit, fit_scaler
from .piecewise import (
    ExtrapolationWarning,
    build_linear_design,
    build_quadratic_design,
    evaluate_fit,
    fit_from_dict,
    solve_linear_fit,
    solve_quadratic_fit,
)
from .prep import extract_lower_branch, segment_samples, select_breakpoints
from .sim import Trajectory, generate_dataset
from .svm import MulticlassSvmModel, load_model, predict, save_model, train_multiclass

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# per-trajectory fitting
# ---------------------------------------------------------------------------

def fit_trajectory(traj: Trajectory, config: PipelineConfig):
    """Lower branch -> breakpoints -> segmentation -> closed-form fit."""
    prep = config.raw["prep"]
    lower = extract_lower_branch(traj, prep["n_bins"], prep["min_loop_extent"])
    grid = select_breakpoints(lower, prep["policy"], prep["mode"], prep["n_pieces"], prep["manual"])
    seg = segment_samples(lower, grid)
    ridge = config.raw["fit"]["ridge"]
    if grid.mode == "linear":
        return solve_linear_fit(build_linear_design(seg, grid), config.bounds(), ridge)
    return solve_quadratic_fit(build_quadratic_design(seg, grid), config.bounds(), ridge)


# ---------------------------------------------------------------------------
# evaluation helpers
# ---------------------------------------------------------------------------

def stratified_split(labels, fraction: float, seed: int):
    """Boolean ``(train, test)`` masks with ``round(fraction * n)`` test items per class.

    Every class keeps at least one item on each side.
    """
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size < 2:
        raise TooFewSamples("need at least two classes")
    small = classes[counts < 2]
    if small.size:
        raise TooFewSamples(f"classes {small.tolist()} have fewer than 2 samples")
    rng = np.random.default_rng(seed)
    test = np.zeros(labels.shape[0], dtype=bool)
    for c, n in zip(classes, counts):
        idx = np.flatnonzero(labels == c)
        n_test = min(max(int(round(fraction * n)), 1), n - 1)
        test[rng.permutation(idx)[:n_test]] = True
    return ~test, test


def eval_report(model: MulticlassSvmModel, labels, X, fingerprint: Optional[str] = None) -> dict:
    y_true = np.asarray(labels)
    y_pred = predict(model, X) if len(y_true) else np.zeros(0, dtype=np.int64)
    classes = list(model.labels)
    pos = {c: k for k, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true.tolist(), np.asarray(y_pred).tolist()):
        if t not in pos:
            raise DimensionMismatch(f"label {t} is unknown to the model")
        cm[pos[t], pos[p]] += 1
    total = int(cm.sum())
    per_class = {}
    for c, k in pos.items():
        tp = int(cm[k, k])
        col, row = int(cm[:, k].sum()), int(cm[k].sum())
        per_class[str(c)] = {
            "precision": tp / col if col else 0.0,
            "recall": tp / row if row else 0.0,
            "support": row,
        }
    return {
        "accuracy": float(np.trace(cm) / total) if total else 0.0,
        "config_fingerprint": fingerprint or model.metadata.get("config_fingerprint"),
        "confusion_matrix": cm.tolist(),
        "labels": [int(c) for c in classes],
        "n_test": total,
        "per_class": per_class,
    }


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(config: PipelineConfig, out_dir) -> Path:
    """Generate the configured dataset; returns the manifest path."""
    trajs = generate_dataset(
        config.scenarios(), config.circuit(), config.source(),
        config.per_class, config.eta, config.seed, config.asymmetry,
    )
    manifest = io.write_dataset(trajs, out_dir)
    log.info("wrote %d trajectories to %s", len(trajs), out_dir)
    return manifest


def cmd_ingest(data_dir, manifest=None) -> dict:
    """Validate an on-disk dataset; returns a summary."""
    trajs = io.read_dataset(data_dir, manifest)
    for tr in trajs:
        tr.validate()
    labels, counts = np.unique([tr.label for tr in trajs], return_counts=True)
    return {
        "n_trajectories": len(trajs),
        "classes": {str(int(c)): int(n) for c, n in zip(labels, counts)},
        "trajectories": trajs,
    }


@dataclass
class FitSummary:
    n_ok: int = 0
    failures: list = field(default_factory=list)
    latencies: list = field(default_factory=list)

    @property
    def n_failed(self):
        return len(self.failures)


def cmd_fit(trajectories, config: PipelineConfig, out_dir, strict: bool = False) -> FitSummary:
    """Fit every trajectory, write ``fits/*.json`` and ``features.csv``.

    Failures are recorded in ``fit_failures.json`` and skipped unless
    ``strict`` is set, in which case the first one is re-raised.
    """
    out_dir = Path(out_dir)
    (out_dir / "fits").mkdir(parents=True, exist_ok=True)
    summary = FitSummary()
    labels, rows = [], []
    for k, traj in enumerate(trajectories):
        name = Path(traj.meta.get("file", f"traj_{k:05d}.csv")).stem
        t0 = time.perf_counter()
        try:
            fit = fit_trajectory(traj, config)
            feats = features_from_fit(fit, traj.label)
        except HifError as exc:
            if strict:
                raise
            summary.failures.append({"index": k, "file": traj.meta.get("file"), "label": traj.label,
                                     "error": type(exc).__name__, "message": str(exc)})
            continue
        summary.latencies.append(time.perf_counter() - t0)
        doc = fit.to_dict()
        doc["label"] = traj.label
        doc["source"] = traj.meta.get("file")
        io.write_json(doc, out_dir / "fits" / f"{name}.json")
        labels.append(traj.label)
        rows.append(feats.values)
        summary.n_ok += 1
    n_pieces = config.raw["prep"]["n_pieces"]
    d = n_pieces if config.mode == "linear" else 2 * n_pieces
    X = np.asarray(rows).reshape(len(rows), d)
    io.write_features_csv(labels, X, out_dir / "features.csv")
    io.write_json(summary.failures, out_dir / "fit_failures.json")
    lat = summary.latencies
    io.write_json({"n_fitted": len(lat),
                   "mean_seconds_per_trajectory": float(np.mean(lat)) if lat else None,
                   "max_seconds_per_trajectory": float(np.max(lat)) if lat else None},
                  out_dir / "fit_timing.json")
    return summary


def cmd_train(features_csv, config: PipelineConfig, out_dir):
    """Stratified split, scaler on the training part, SVM, report on the test part.

    Writes ``model.json``, ``report.json``, ``train_features.csv``,
    ``test_features.csv`` and ``timing.json``. Returns ``(model, report)``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels, X = io.read_features_csv(features_csv)
    ev = config.raw["eval"]
    train, test = stratified_split(labels, ev["split_fraction"], ev["split_seed"])
    s = config.raw["svm"]
    scaler = fit_scaler(X[train]) if s["standardize"] else None
    fingerprint = config.fingerprint()
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = train_multiclass(
            X[train], labels[train], config.kernel(), s["C"], s["tol"], s["max_passes"], scaler,
            metadata={"config_fingerprint": fingerprint, "n_train": int(train.sum()),
                      "mode": config.mode, "split_seed": ev["split_seed"]},
        )
    train_time = time.perf_counter() - t0
    model.metadata["unconverged_pairs"] = sum(1 for _, _, m in model.pairs if not m.converged)
    for w in caught:
        log.warning("%s", w.message)
    save_model(model, out_dir / "model.json")
    io.write_features_csv(labels[train], X[train], out_dir / "train_features.csv")
    io.write_features_csv(labels[test], X[test], out_dir / "test_features.csv")

    t0 = time.perf_counter()
    report = eval_report(model, labels[test], X[test], fingerprint)
    eval_time = time.perf_counter() - t0
    io.write_json(report, out_dir / "report.json")
    n_test = max(int(test.sum()), 1)
    io.write_json({"train_seconds": train_time, "eval_seconds": eval_time,
                   "predict_latency_seconds": eval_time / n_test}, out_dir / "timing.json")
    return model, report


def cmd_eval(model_path, features_csv, out_dir=None) -> dict:
    model = load_model(model_path)
    labels, X = io.read_features_csv(features_csv)
    if model.scaler is not None and X.shape[1] != model.scaler.mean.shape[0]:
        raise DimensionMismatch(f"model expects {model.scaler.mean.shape[0]} features, got {X.shape[1]}")
    t0 = time.perf_counter()
    report = eval_report(model, labels, X)
    elapsed = time.perf_counter() - t0
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        io.write_json(report, out_dir / "eval_report.json")
        io.write_json({"eval_seconds": elapsed,
                       "predict_latency_seconds": elapsed / max(len(labels), 1)},
                      out_dir / "eval_timing.json")
    return report


def cmd_plot_data(traj: Trajectory, fit_doc: dict, out_path, lower_branch: bool = False,
                  n_bins: int = 64, min_loop_extent: float = 0.05) -> Path:
    """Overlay CSV ``i,v_measured,v_fit,breakpoint`` sorted by current.

    Breakpoint rows carry ``breakpoint=1``, the knot voltage in ``v_fit`` and
    an empty ``v_measured``.
    """
    fit = fit_from_dict(fit_doc)
    if lower_branch:
        traj = extract_lower_branch(traj, n_bins, min_loop_extent)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolationWarning)
        v_fit = np.atleast_1d(evaluate_fit(fit, traj.i)) if len(traj) else np.zeros(0)
    rows = [(i, 0, v, f) for i, v, f in zip(traj.i.tolist(), traj.v.tolist(), v_fit.tolist())]
    rows += [(x, 1, None, float(y)) for x, y in zip(fit.grid.xs, fit.knots)]
    rows.sort(key=lambda r: (r[0], r[1]))
    lines = ["i,v_measured,v_fit,breakpoint"]
    for i, flag, v, f in rows:
        lines.append(f"{i!r},{'' if v is None else repr(v)},{f!r},{flag}")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(lines) + "\n")
    return out_path
