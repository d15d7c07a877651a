"""Synthetic feederhead V-I trajectories from the two-diode arc model.

The feeder is reduced to one Thevenin branch per fault location: a series
resistance and reactance between the feederhead and the arc. The reactance
is handled quasi-statically, as a phase lag of the source voltage seen at the
fault point, so each time step is solved in closed form per conduction regime.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import DuplicateLabel, InvalidParameter, NonConvergence

# branch resistances never drop below this fraction of nominal under jitter
_JITTER_FLOOR = 0.1


@dataclass(frozen=True)
class HifCircuitParams:
    """Two antiparallel DC sources with diodes and branch resistances."""

    v_p: float
    v_n: float
    r_p: float
    r_n: float
    flicker: float = 0.05

    def __post_init__(self):
        if not (self.v_n < 0 < self.v_p):
            raise InvalidParameter(f"need v_n < 0 < v_p, got v_n={self.v_n}, v_p={self.v_p}")
        if not (self.r_p > 0 and self.r_n > 0):
            raise InvalidParameter("branch resistances must be strictly positive")
        if not (0.0 <= self.flicker <= 0.5):
            raise InvalidParameter(f"flicker must lie in [0, 0.5], got {self.flicker}")


@dataclass(frozen=True)
class FaultScenario:
    location_label: int
    series_resistance: float = 0.0
    series_reactance: float = 0.0

    def __post_init__(self):
        for name in ("series_resistance", "series_reactance"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidParameter(f"{name} must be finite and >= 0, got {value}")

    def to_dict(self):
        return {
            "location_label": int(self.location_label),
            "series_reactance": float(self.series_reactance),
            "series_resistance": float(self.series_resistance),
        }


@dataclass(frozen=True)
class SourceSpec:
    amplitude: float
    frequency: float = 60.0
    sample_rate: float = 20_000.0
    n_cycles: int = 2

    def __post_init__(self):
        if not (self.amplitude > 0 and self.frequency > 0):
            raise InvalidParameter("amplitude and frequency must be positive")
        if self.sample_rate < 100 * self.frequency:
            raise InvalidParameter("sample_rate must be at least 100 x frequency")
        if int(self.n_cycles) != self.n_cycles or self.n_cycles < 1:
            raise InvalidParameter("n_cycles must be an integer >= 1")

    @property
    def n_samples(self) -> int:
        return int(round(self.n_cycles * self.sample_rate / self.frequency))


@dataclass
class Trajectory:
    """Feederhead samples ``(t, i, v)`` plus label and provenance.

    ``fault_voltage`` is only populated by the simulator; it is a diagnostic
    channel and never written to disk.
    """

    t: np.ndarray
    i: np.ndarray
    v: np.ndarray
    label: Optional[int] = None
    meta: dict = field(default_factory=dict)
    fault_voltage: Optional[np.ndarray] = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.i = np.asarray(self.i, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if not (self.t.shape == self.i.shape == self.v.shape) or self.t.ndim != 1:
            raise InvalidParameter("t, i, v must be 1-D arrays of equal length")

    def __len__(self):
        return self.t.shape[0]

    def validate(self, sample_rate: Optional[float] = None, rtol: float = 1e-6):
        """Check finiteness and uniform, strictly increasing timestamps."""
        if not (np.all(np.isfinite(self.t)) and np.all(np.isfinite(self.i)) and np.all(np.isfinite(self.v))):
            raise InvalidParameter("trajectory contains non-finite values")
        if len(self) > 1:
            dt = np.diff(self.t)
            if np.any(dt <= 0):
                raise InvalidParameter("timestamps must be strictly increasing")
            step = 1.0 / sample_rate if sample_rate else dt[0]
            if np.any(np.abs(dt - step) > rtol * max(step, abs(self.t[-1]) * 1e-9)):
                raise InvalidParameter("timestamps must be uniformly spaced")
        return self

    def copy(self) -> "Trajectory":
        return Trajectory(
            self.t.copy(), self.i.copy(), self.v.copy(), self.label, dict(self.meta),
            None if self.fault_voltage is None else self.fault_voltage.copy(),
        )


def diode_branch_current(v_f: float, params: HifCircuitParams) -> float:
    """Current through the diode pair for a given fault-point voltage."""
    if v_f > params.v_p:
        return (v_f - params.v_p) / params.r_p
    if v_f < params.v_n:
        return (v_f - params.v_n) / params.r_n
    return 0.0


def simulate_hif_trajectory(circuit: HifCircuitParams, source: SourceSpec,
                            fault: FaultScenario, seed: int) -> Trajectory:
    """Time-step the sinusoidal source into the arc through the series impedance.

    The recorded feederhead voltage is the stiff source voltage and the
    feederhead current is the fault current.
    """
    n = source.n_samples
    t = np.arange(n) / source.sample_rate
    omega = 2.0 * math.pi * source.frequency
    r_mid = 0.5 * (circuit.r_p + circuit.r_n)
    lag = math.atan2(fault.series_reactance, fault.series_resistance + r_mid)

    rng = np.random.default_rng(seed)
    jitter = rng.standard_normal((2, n))
    r_p = circuit.r_p * np.maximum(1.0 + circuit.flicker * jitter[0], _JITTER_FLOOR)
    r_n = circuit.r_n * np.maximum(1.0 + circuit.flicker * jitter[1], _JITTER_FLOOR)

    source_v = source.amplitude * np.sin(omega * t)
    drive = source_v if lag == 0.0 else source.amplitude * np.sin(omega * t - lag)

    current, v_fault = _kernels.arc_steps(
        drive, float(circuit.v_p), float(circuit.v_n), r_p, r_n,
        float(fault.series_resistance), float(fault.series_reactance),
    )
    if not (np.all(np.isfinite(current)) and np.all(np.isfinite(v_fault))):
        raise NonConvergence("circuit solve produced non-finite values; check parameters")

    meta = {
        "seed": int(seed),
        "scenario": fault.to_dict(),
        "eta": 0.0,
        "sample_rate": float(source.sample_rate),
    }
    return Trajectory(t, current, source_v.copy(), fault.location_label, meta, v_fault)


def add_measurement_noise(traj: Trajectory, eta: float, seed: int) -> Trajectory:
    """Zero-mean Gaussian noise with std ``eta`` times each channel's peak magnitude."""
    if eta < 0:
        raise InvalidParameter("eta must be >= 0")
    out = traj.copy()
    if eta == 0:
        return out
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((2, len(traj)))
    i_nom = float(np.max(np.abs(traj.i))) if len(traj) else 0.0
    v_nom = float(np.max(np.abs(traj.v))) if len(traj) else 0.0
    out.i = traj.i + eta * i_nom * noise[0]
    out.v = traj.v + eta * v_nom * noise[1]
    out.meta["eta"] = float(eta)
    return out


def _sub_seeds(seed: int, count: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(s.generate_state(1, dtype=np.uint32)[0]) for s in ss.spawn(count)]


def generate_dataset(scenarios: Sequence[FaultScenario], circuit: HifCircuitParams,
                     source: SourceSpec, per_class: int, eta: float, seed: int,
                     asymmetry: Optional[tuple[float, float]] = None) -> list[Trajectory]:
    """Noisy labelled trajectories, ``per_class`` for each scenario.

    ``asymmetry``, when given, draws one factor per scenario from that range
    and scales ``v_p`` by it and ``v_n`` by its reciprocal.
    """
    if per_class < 1:
        raise InvalidParameter("per_class must be >= 1")
    labels = [s.location_label for s in scenarios]
    if len(set(labels)) != len(labels):
        dup = sorted({x for x in labels if labels.count(x) > 1})
        raise DuplicateLabel(f"duplicate scenario labels: {dup}")

    seeds = _sub_seeds(seed, len(scenarios) * (per_class + 1))
    out = []
    for s_idx, scenario in enumerate(scenarios):
        base = s_idx * (per_class + 1)
        params = circuit
        if asymmetry is not None:
            lo, hi = asymmetry
            factor = float(np.random.default_rng(seeds[base]).uniform(lo, hi))
            params = replace(circuit, v_p=circuit.v_p * factor, v_n=circuit.v_n / factor)
        for k in range(per_class):
            sub = seeds[base + 1 + k]
            traj = simulate_hif_trajectory(params, source, scenario, sub)
            traj = add_measurement_noise(traj, eta, sub ^ 0x5EED)
            traj.meta["seed"] = sub
            traj.fault_voltage = None
            out.append(traj)
    return out
