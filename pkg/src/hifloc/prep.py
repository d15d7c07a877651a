"""Lower-branch extraction, breakpoint grids and segmentation of the current axis."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateLoop,
    EmptyTrajectory,
    InsufficientSamples,
    InvalidParameter,
    NonIncreasingGrid,
)
from .sim import Trajectory

MODES = ("linear", "quadratic")
POLICIES = ("equal-range", "quantile", "manual")
MIN_SAMPLES = {"linear": 2, "quadratic": 3}


@dataclass(frozen=True)
class BreakpointGrid:
    """Knot locations on the current axis.

    A linear grid holds the ``n_pieces + 1`` piece boundaries. A quadratic grid
    interleaves the exact midpoint of every piece, giving ``2 n_pieces + 1``
    knots.
    """

    xs: tuple
    mode: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "xs", tuple(float(x) for x in self.xs))
        if self.mode not in MODES:
            raise InvalidParameter(f"mode must be one of {MODES}")
        xs = np.asarray(self.xs)
        if xs.size < 2 or np.any(~np.isfinite(xs)) or np.any(np.diff(xs) <= 0):
            raise NonIncreasingGrid(f"knots must be finite and strictly increasing: {self.xs}")
        if self.mode == "quadratic":
            if xs.size % 2 == 0 or xs.size < 3:
                raise InvalidParameter("quadratic grid needs an odd number (>= 3) of knots")
            for k in range(1, xs.size, 2):
                if self.xs[k] != (self.xs[k - 1] + self.xs[k + 1]) / 2:
                    raise InvalidParameter(f"knot {k} is not the exact midpoint of its piece")

    @classmethod
    def from_outer(cls, outer: Sequence[float], mode: str = "linear") -> "BreakpointGrid":
        outer = [float(x) for x in outer]
        if mode == "linear":
            return cls(tuple(outer), "linear")
        if np.any(np.diff(outer) <= 0):
            raise NonIncreasingGrid(f"breakpoints must be strictly increasing: {tuple(outer)}")
        xs = [outer[0]]
        for lo, hi in zip(outer[:-1], outer[1:]):
            xs += [(lo + hi) / 2, hi]
        return cls(tuple(xs), "quadratic")

    @property
    def step(self) -> int:
        return 1 if self.mode == "linear" else 2

    @property
    def outer(self) -> np.ndarray:
        return np.asarray(self.xs[:: self.step])

    @property
    def n_pieces(self) -> int:
        return (len(self.xs) - 1) // self.step

    @property
    def n_knots(self) -> int:
        return len(self.xs)

    def piece_knots(self, k: int) -> tuple:
        """Indices of the knots of piece ``k`` (2 for linear, 3 for quadratic)."""
        s = self.step
        return tuple(range(k * s, k * s + s + 1))


@dataclass
class Segmentation:
    grid: BreakpointGrid
    currents: list
    voltages: list
    dropped: int = 0

    @property
    def counts(self) -> tuple:
        return tuple(len(c) for c in self.currents)

    @property
    def n_samples(self) -> int:
        return sum(self.counts)


def extract_lower_branch(traj: Trajectory, n_bins: int = 64, min_loop_extent: float = 0.05) -> Trajectory:
    """Lower branch of the V-I loop, one point per occupied current bin.

    The current range is split into ``n_bins`` equal bins. Within each bin the
    samples at or below the midline between the bin's minimum and maximum
    voltage are kept and averaged into a single point, so the result is
    single-valued in current and sorted by current. ``min_loop_extent`` is the
    smallest acceptable per-bin voltage spread, as a fraction of the total
    voltage range.

    The result is tagged in ``meta``; passing it back in returns a copy.
    """
    if traj.meta.get("lower_branch"):
        return traj.copy()
    if len(traj) == 0:
        raise EmptyTrajectory("trajectory has no samples")
    i, v, t = traj.i, traj.v, traj.t
    i_lo, i_hi = float(i.min()), float(i.max())
    v_range = float(v.max() - v.min())
    if i_hi <= i_lo or v_range <= 0:
        raise DegenerateLoop("trajectory has no extent in current or voltage")

    idx = _bin_index(i, i_lo, i_hi, n_bins)
    vmin = np.full(n_bins, np.inf)
    vmax = np.full(n_bins, -np.inf)
    np.minimum.at(vmin, idx, v)
    np.maximum.at(vmax, idx, v)
    occupied = np.isfinite(vmin)
    vmin[~occupied] = 0.0
    vmax[~occupied] = 0.0
    spread = vmax - vmin
    if spread.max() < min_loop_extent * v_range:
        raise DegenerateLoop(
            f"loop extent {spread.max():.3g} below floor {min_loop_extent * v_range:.3g}"
        )

    midline = 0.5 * (vmin + vmax)
    keep = v <= midline[idx]
    k_idx = idx[keep]
    counts = np.bincount(k_idx, minlength=n_bins)
    bins = np.flatnonzero(counts)

    def bin_mean(x):
        return np.bincount(k_idx, weights=x[keep], minlength=n_bins)[bins] / counts[bins]

    ti, ii, vi = bin_mean(t), bin_mean(i), bin_mean(v)
    order = np.argsort(ii, kind="stable")

    meta = dict(traj.meta)
    meta["lower_branch"] = True
    meta["lower_branch_bins"] = int(n_bins)
    return Trajectory(ti[order], ii[order], vi[order], traj.label, meta)


def _bin_index(i, lo, hi, n_bins):
    width = (hi - lo) / n_bins
    return np.clip(np.floor((i - lo) / width).astype(np.int64), 0, n_bins - 1)


def select_breakpoints(traj: Trajectory, policy: str = "equal-range", mode: str = "linear",
                       n_pieces: int = 3, manual: Optional[Sequence[float]] = None) -> BreakpointGrid:
    """Knot grid spanning the trajectory's current range.

    ``equal-range`` splits ``[min, max]`` into equal-width pieces, ``quantile``
    puts the interior breakpoints at current quantiles and ``manual`` takes
    the piece boundaries from ``manual`` verbatim.
    """
    if policy not in POLICIES:
        raise InvalidParameter(f"unknown breakpoint policy {policy!r}")
    if mode not in MODES:
        raise InvalidParameter(f"unknown mode {mode!r}")
    if policy == "manual":
        if manual is None:
            raise InvalidParameter("manual policy requires breakpoint values")
        return BreakpointGrid.from_outer(manual, mode)
    if len(traj) == 0:
        raise EmptyTrajectory("cannot place breakpoints on an empty trajectory")
    if n_pieces < 1:
        raise InvalidParameter("n_pieces must be >= 1")
    lo, hi = float(traj.i.min()), float(traj.i.max())
    if policy == "equal-range":
        outer = [lo + (hi - lo) * k / n_pieces for k in range(n_pieces + 1)]
    else:
        inner = np.quantile(traj.i, [k / n_pieces for k in range(1, n_pieces)])
        outer = [lo, *inner.tolist(), hi]
    outer[0], outer[-1] = lo, hi
    return BreakpointGrid.from_outer(outer, mode)


def segment_samples(traj: Trajectory, grid: BreakpointGrid,
                    min_samples: Optional[int] = None) -> Segmentation:
    """Assign samples to pieces by current.

    Pieces are ``[x_0, x_1]``, ``(x_1, x_2]``, ... so a sample on an interior
    breakpoint goes to the left piece. Samples outside the grid are dropped and
    counted. ``min_samples`` defaults to 2 (linear) or 3 (quadratic); pass 0 to
    skip the check.
    """
    outer = grid.outer
    i, v = traj.i, traj.v
    inside = (i >= outer[0]) & (i <= outer[-1])
    piece = np.clip(np.searchsorted(outer, i, side="left") - 1, 0, grid.n_pieces - 1)
    currents, voltages = [], []
    for k in range(grid.n_pieces):
        sel = inside & (piece == k)
        currents.append(i[sel].copy())
        voltages.append(v[sel].copy())
    seg = Segmentation(grid, currents, voltages, int(np.count_nonzero(~inside)))

    need = MIN_SAMPLES[grid.mode] if min_samples is None else min_samples
    short = [k + 1 for k, n in enumerate(seg.counts) if n < need]
    if short:
        raise InsufficientSamples(f"pieces {short} have fewer than {need} samples (counts {seg.counts})")
    return seg
