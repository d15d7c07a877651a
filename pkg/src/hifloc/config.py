"""Pipeline configuration: one YAML document, validated in full before any work.

Unknown keys and bad values raise ``ConfigError`` naming the offending field
path (``svm.kernel``, ``simulation.scenarios[3].series_resistance``, ...).
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import yaml

from .errors import ConfigError, HifError
from .piecewise import FitBounds
from .prep import MODES, POLICIES
from .sim import FaultScenario, HifCircuitParams, SourceSpec
from .svm import KINDS, KernelSpec

DEFAULTS: dict = {
    "simulation": {
        "seed": 2024,
        "per_class": 20,
        "eta": 0.01,
        "asymmetry": None,
        "circuit": {"v_p": 4000.0, "v_n": -4000.0, "r_p": 200.0, "r_n": 200.0, "flicker": 0.05},
        "source": {"amplitude": 10000.0, "frequency": 60.0, "sample_rate": 20000.0, "n_cycles": 2},
        "scenarios": None,
        "chain": None,
    },
    "prep": {
        "mode": "linear",
        "policy": "equal-range",
        "n_pieces": 3,
        "manual": None,
        "n_bins": 64,
        "min_loop_extent": 0.05,
    },
    "fit": {"bounds": {"lower": None, "upper": None}, "ridge": False},
    "svm": {
        "kernel": "gaussian",
        "degree": 3,
        "coef0": 1.0,
        "gamma": None,
        "C": 10.0,
        "tol": 1e-3,
        "max_passes": 200,
        "standardize": True,
    },
    "eval": {"split_fraction": 0.3, "split_seed": 11},
}

CHAIN_DEFAULTS = {"count": 6, "first_label": 1, "label_step": 1,
                  "r_start": 5.0, "r_step": 30.0, "x_ratio": 0.2}


def _merge(defaults, given, path):
    if given is None:
        return copy.deepcopy(defaults)
    if not isinstance(given, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"{where}: unknown key")
        if isinstance(defaults[key], dict) and value is not None:
            out[key] = _merge(defaults[key], value, where)
        else:
            out[key] = value
    return out


def _num(value, path, lo=None, hi=None, integer=False, allow_none=False, strict_lo=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if lo is not None and (value <= lo if strict_lo else value < lo):
        raise ConfigError(f"{path}: must be {'>' if strict_lo else '>='} {lo}, got {value!r}")
    if hi is not None and value > hi:
        raise ConfigError(f"{path}: must be <= {hi}, got {value!r}")
    return int(value) if integer else float(value)


def _choice(value, options, path):
    if value not in options:
        raise ConfigError(f"{path}: expected one of {list(options)}, got {value!r}")
    return value


@dataclass
class PipelineConfig:
    raw: dict

    # -- simulation ---------------------------------------------------------
    @property
    def seed(self) -> int:
        return self.raw["simulation"]["seed"]

    @property
    def per_class(self) -> int:
        return self.raw["simulation"]["per_class"]

    @property
    def eta(self) -> float:
        return self.raw["simulation"]["eta"]

    @property
    def asymmetry(self):
        a = self.raw["simulation"]["asymmetry"]
        return None if a is None else tuple(a)

    def circuit(self) -> HifCircuitParams:
        return HifCircuitParams(**self.raw["simulation"]["circuit"])

    def source(self) -> SourceSpec:
        return SourceSpec(**self.raw["simulation"]["source"])

    def scenarios(self) -> list:
        sim = self.raw["simulation"]
        if sim["scenarios"] is not None:
            return [FaultScenario(s["label"], s["series_resistance"], s["series_reactance"])
                    for s in sim["scenarios"]]
        return chain_scenarios(**sim["chain"])

    # -- prep / fit ---------------------------------------------------------
    @property
    def mode(self) -> str:
        return self.raw["prep"]["mode"]

    def bounds(self) -> Optional[FitBounds]:
        b = self.raw["fit"]["bounds"]
        if b["lower"] is None and b["upper"] is None:
            return None
        return FitBounds(b["lower"], b["upper"])

    # -- svm / eval ---------------------------------------------------------
    def kernel(self) -> KernelSpec:
        s = self.raw["svm"]
        return KernelSpec(s["kernel"], s["degree"], s["coef0"], s["gamma"])

    def fingerprint(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_mode(self, mode: Optional[str]) -> "PipelineConfig":
        if mode is None:
            return self
        raw = copy.deepcopy(self.raw)
        raw["prep"]["mode"] = _choice(mode, MODES, "prep.mode")
        return PipelineConfig(raw)


def chain_scenarios(count=6, first_label=1, label_step=1, r_start=5.0, r_step=30.0, x_ratio=0.2) -> list:
    """Scenarios on a radial chain: impedance grows by a fixed step per location."""
    out = []
    for k in range(count):
        r = r_start + k * r_step
        out.append(FaultScenario(first_label + k * label_step, r, x_ratio * r))
    return out


def validate(raw: dict) -> PipelineConfig:
    cfg = _merge(DEFAULTS, raw, "")
    sim = cfg["simulation"]
    sim["seed"] = _num(sim["seed"], "simulation.seed", 0, integer=True)
    sim["per_class"] = _num(sim["per_class"], "simulation.per_class", 1, integer=True)
    sim["eta"] = _num(sim["eta"], "simulation.eta", 0)
    if sim["asymmetry"] is not None:
        a = sim["asymmetry"]
        if not (isinstance(a, (list, tuple)) and len(a) == 2):
            raise ConfigError("simulation.asymmetry: expected [low, high]")
        lo = _num(a[0], "simulation.asymmetry[0]", 0, strict_lo=True)
        hi = _num(a[1], "simulation.asymmetry[1]", lo)
        sim["asymmetry"] = [lo, hi]
    for key in sim["circuit"]:
        sim["circuit"][key] = _num(sim["circuit"][key], f"simulation.circuit.{key}")
    src = sim["source"]
    for key in ("amplitude", "frequency", "sample_rate"):
        src[key] = _num(src[key], f"simulation.source.{key}", 0, strict_lo=True)
    src["n_cycles"] = _num(src["n_cycles"], "simulation.source.n_cycles", 1, integer=True)

    if sim["scenarios"] is not None:
        if not isinstance(sim["scenarios"], list) or not sim["scenarios"]:
            raise ConfigError("simulation.scenarios: expected a non-empty list")
        seen = set()
        for k, s in enumerate(sim["scenarios"]):
            p = f"simulation.scenarios[{k}]"
            s = _merge({"label": None, "series_resistance": 0.0, "series_reactance": 0.0}, s, p)
            s["label"] = _num(s["label"], f"{p}.label", integer=True)
            if s["label"] in seen:
                raise ConfigError(f"{p}.label: duplicate label {s['label']}")
            seen.add(s["label"])
            s["series_resistance"] = _num(s["series_resistance"], f"{p}.series_resistance", 0)
            s["series_reactance"] = _num(s["series_reactance"], f"{p}.series_reactance", 0)
            sim["scenarios"][k] = s
    else:
        ch = _merge(CHAIN_DEFAULTS, sim["chain"] or {}, "simulation.chain")
        ch["count"] = _num(ch["count"], "simulation.chain.count", 1, integer=True)
        ch["first_label"] = _num(ch["first_label"], "simulation.chain.first_label", integer=True)
        ch["label_step"] = _num(ch["label_step"], "simulation.chain.label_step", 1, integer=True)
        ch["r_start"] = _num(ch["r_start"], "simulation.chain.r_start", 0)
        ch["r_step"] = _num(ch["r_step"], "simulation.chain.r_step", 0)
        ch["x_ratio"] = _num(ch["x_ratio"], "simulation.chain.x_ratio", 0)
        sim["chain"] = ch

    prep = cfg["prep"]
    _choice(prep["mode"], MODES, "prep.mode")
    _choice(prep["policy"], POLICIES, "prep.policy")
    prep["n_pieces"] = _num(prep["n_pieces"], "prep.n_pieces", 1, integer=True)
    prep["n_bins"] = _num(prep["n_bins"], "prep.n_bins", 2, integer=True)
    prep["min_loop_extent"] = _num(prep["min_loop_extent"], "prep.min_loop_extent", 0)
    if prep["policy"] == "manual":
        m = prep["manual"]
        if not isinstance(m, list) or len(m) != prep["n_pieces"] + 1:
            raise ConfigError(f"prep.manual: expected {prep['n_pieces'] + 1} breakpoints")
        prep["manual"] = [_num(x, f"prep.manual[{k}]") for k, x in enumerate(m)]

    fit = cfg["fit"]
    if not isinstance(fit["ridge"], bool):
        raise ConfigError("fit.ridge: expected true/false")
    for side in ("lower", "upper"):
        vals = fit["bounds"][side]
        if vals is not None:
            if not isinstance(vals, list):
                raise ConfigError(f"fit.bounds.{side}: expected a list")
            fit["bounds"][side] = [_num(v, f"fit.bounds.{side}[{k}]", allow_none=True)
                                   for k, v in enumerate(vals)]

    s = cfg["svm"]
    _choice(s["kernel"], KINDS, "svm.kernel")
    s["degree"] = _num(s["degree"], "svm.degree", 1, integer=True)
    s["coef0"] = _num(s["coef0"], "svm.coef0")
    s["gamma"] = _num(s["gamma"], "svm.gamma", 0, allow_none=True, strict_lo=True)
    s["C"] = _num(s["C"], "svm.C", 0, strict_lo=True)
    s["tol"] = _num(s["tol"], "svm.tol", 0, strict_lo=True)
    s["max_passes"] = _num(s["max_passes"], "svm.max_passes", 1, integer=True)
    if not isinstance(s["standardize"], bool):
        raise ConfigError("svm.standardize: expected true/false")

    ev = cfg["eval"]
    frac = _num(ev["split_fraction"], "eval.split_fraction", 0, 1, strict_lo=True)
    if frac >= 1:
        raise ConfigError("eval.split_fraction: must be < 1")
    ev["split_fraction"] = frac
    ev["split_seed"] = _num(ev["split_seed"], "eval.split_seed", 0, integer=True)

    config = PipelineConfig(cfg)
    # domain-level checks (circuit invariants, source sampling) with field paths
    for path, build in (("simulation.circuit", config.circuit), ("simulation.source", config.source)):
        try:
            build()
        except HifError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config


def load_config(path: Optional[Any]) -> PipelineConfig:
    """Read and validate a YAML config; ``None`` gives the defaults."""
    if path is None:
        return validate({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    return validate(raw or {})
