"""Continuous piecewise linear / quadratic least squares with fixed breakpoints.

The decision variables are the voltages at the knots. Every sample's predicted
voltage is a fixed linear combination of the knots of its piece (barycentric
weights for lines, Lagrange weights through left/mid/right for parabolas), so
both problems reduce to ``min ||A y - b||^2`` over the knot vector ``y``.
Continuity across pieces comes for free because neighbouring pieces share
their boundary knot.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .errors import (
    GridMismatch,
    HifError,
    InfeasibleBounds,
    InvalidParameter,
    SingularNormalEquations,
    ZeroWidthPiece,
)
from .prep import BreakpointGrid, Segmentation


class ExtrapolationWarning(UserWarning):
    pass


@dataclass
class FitBounds:
    """Optional per-knot voltage bounds; ``None`` entries mean unbounded."""

    lower: Optional[Sequence[Optional[float]]] = None
    upper: Optional[Sequence[Optional[float]]] = None

    def arrays(self, n_knots: int):
        lo = _bound_array(self.lower, n_knots, -np.inf)
        hi = _bound_array(self.upper, n_knots, np.inf)
        bad = np.flatnonzero(lo > hi)
        if bad.size:
            raise InfeasibleBounds(f"lower bound exceeds upper bound at knots {bad.tolist()}")
        return lo, hi

    @property
    def active(self) -> bool:
        return self.lower is not None or self.upper is not None


def _bound_array(values, n, fill):
    out = np.full(n, fill)
    if values is None:
        return out
    if len(values) != n:
        raise InvalidParameter(f"expected {n} bounds, got {len(values)}")
    for k, b in enumerate(values):
        if b is not None:
            out[k] = float(b)
    return out


@dataclass
class DesignMatrix:
    A: np.ndarray
    b: np.ndarray
    piece: np.ndarray
    grid: BreakpointGrid

    @property
    def mode(self):
        return self.grid.mode


# ---------------------------------------------------------------------------
# interpolation weights
# ---------------------------------------------------------------------------

def _linear_weights(x, xl, xr):
    width = xr - xl
    return (xr - x) / width, (x - xl) / width


def _lagrange_weights(x, xl, xm, xr):
    wl = (x - xm) * (x - xr) / ((xl - xm) * (xl - xr))
    wm = (x - xl) * (x - xr) / ((xm - xl) * (xm - xr))
    wr = (x - xl) * (x - xm) / ((xr - xl) * (xr - xm))
    return wl, wm, wr


def _piece_weights(grid: BreakpointGrid, k: int, x):
    knots = grid.piece_knots(k)
    xs = [grid.xs[j] for j in knots]
    if grid.mode == "linear":
        return knots, _linear_weights(x, *xs)
    return knots, _lagrange_weights(x, *xs)


def _check_widths(grid: BreakpointGrid):
    widths = np.diff(grid.outer)
    if np.any(widths <= 0):
        raise ZeroWidthPiece(f"pieces {np.flatnonzero(widths <= 0).tolist()} have zero width")


def _build_design(seg: Segmentation, grid: BreakpointGrid, mode: str) -> DesignMatrix:
    if grid.mode != mode:
        raise GridMismatch(f"{mode} design needs a {mode} grid, got {grid.mode}")
    if seg.grid != grid:
        raise GridMismatch("segmentation was built on a different grid")
    _check_widths(grid)
    n = seg.n_samples
    A = np.zeros((n, grid.n_knots))
    b = np.empty(n)
    piece = np.empty(n, dtype=np.int64)
    row = 0
    for k in range(grid.n_pieces):
        I, V = seg.currents[k], seg.voltages[k]
        rows = slice(row, row + len(I))
        knots, weights = _piece_weights(grid, k, I)
        for j, w in zip(knots, weights):
            A[rows, j] = w
        b[rows] = V
        piece[rows] = k
        row += len(I)
    return DesignMatrix(A, b, piece, grid)


def build_linear_design(seg: Segmentation, grid: BreakpointGrid) -> DesignMatrix:
    """Rows ``(.., v, w, ..)`` with ``v = (x_r - I)/(x_r - x_l)``, ``w = (I - x_l)/(x_r - x_l)``."""
    return _build_design(seg, grid, "linear")


def build_quadratic_design(seg: Segmentation, grid: BreakpointGrid) -> DesignMatrix:
    """Rows holding the Lagrange weights of each sample on its piece's three knots."""
    return _build_design(seg, grid, "quadratic")


# ---------------------------------------------------------------------------
# fitted models
# ---------------------------------------------------------------------------

@dataclass
class _Fit:
    grid: BreakpointGrid
    knots: np.ndarray
    residual: float
    multipliers: np.ndarray = field(default=None)
    ridge: bool = False

    def to_dict(self) -> dict:
        return {
            "mode": self.grid.mode,
            "grid": list(self.grid.xs),
            "knots": [float(y) for y in self.knots],
            "coefficients": self.coefficients(),
            "residual": float(self.residual),
            "ridge": bool(self.ridge),
        }


@dataclass
class LinearFit(_Fit):
    @property
    def slopes(self) -> np.ndarray:
        return linear_slopes(self)

    @property
    def intercepts(self) -> np.ndarray:
        xl = np.asarray(self.grid.xs[:-1])
        return np.asarray(self.knots[:-1]) - self.slopes * xl

    def coefficients(self) -> list:
        return [{"s": float(s), "h": float(h)} for s, h in zip(self.slopes, self.intercepts)]


@dataclass
class QuadFit(_Fit):
    @property
    def coeffs(self) -> np.ndarray:
        """``(n_pieces, 3)`` array of ``(m, n, h)``."""
        out = np.empty((self.grid.n_pieces, 3))
        xs, ys = self.grid.xs, self.knots
        for k in range(self.grid.n_pieces):
            a, b, c = self.grid.piece_knots(k)
            m = (ys[c] - 2 * ys[b] + ys[a]) / (xs[c] ** 2 - 2 * xs[b] ** 2 + xs[a] ** 2)
            n = (ys[b] - ys[a] - m * (xs[b] ** 2 - xs[a] ** 2)) / (xs[b] - xs[a])
            h = ys[a] - m * xs[a] ** 2 - n * xs[a]
            out[k] = m, n, h
        return out

    def coefficients(self) -> list:
        return [{"m": float(m), "n": float(n), "h": float(h)} for m, n, h in self.coeffs]


Fit = Union[LinearFit, QuadFit]


def linear_slopes(fit: LinearFit) -> np.ndarray:
    xs = np.asarray(fit.grid.xs)
    ys = np.asarray(fit.knots, dtype=float)
    return np.diff(ys) / np.diff(xs)


def fit_from_dict(data: dict) -> Fit:
    grid = BreakpointGrid(tuple(data["grid"]), data["mode"])
    cls = LinearFit if grid.mode == "linear" else QuadFit
    return cls(grid, np.asarray(data["knots"], dtype=float), float(data["residual"]),
               np.zeros(grid.n_knots), bool(data.get("ridge", False)))


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------

def _qr_solve(A, b, columns):
    """Least squares on a column subset via pivoted QR; raises on rank deficiency."""
    if A.shape[0] == 0:
        raise SingularNormalEquations("no samples", columns)
    Q, R, perm = scipy.linalg.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    tol = max(A.shape) * np.finfo(float).eps * (d[0] if d.size else 0.0)
    rank = int(np.count_nonzero(d > tol))
    if rank < A.shape[1]:
        deficient = sorted(int(columns[p]) for p in perm[rank:])
        empty = [int(columns[c]) for c in range(A.shape[1]) if not np.any(A[:, c])]
        detail = f"; knots with no samples in adjacent pieces: {empty}" if empty else ""
        raise SingularNormalEquations(
            f"normal equations are rank deficient (rank {rank} < {A.shape[1]}), "
            f"dependent knots {deficient}{detail}",
            deficient,
        )
    z = scipy.linalg.solve_triangular(R, Q.T @ b)
    y = np.empty_like(z)
    y[perm] = z
    return y


def _ridge_augment(A, b):
    lam = 1e-10 * np.trace(A.T @ A) / A.shape[1]
    if lam <= 0:
        lam = 1e-10
    A_aug = np.vstack([A, np.sqrt(lam) * np.eye(A.shape[1])])
    return A_aug, np.concatenate([b, np.zeros(A.shape[1])])


def _solve_subset(A, b, free, fixed_vals):
    cols = np.flatnonzero(free)
    rhs = b - A[:, ~free] @ fixed_vals[~free]
    out = fixed_vals.copy()
    if cols.size:
        out[cols] = _qr_solve(A[:, cols], rhs, cols)
    return out


def _bounded_lsq(A, b, lo, hi, max_iter=200):
    """Primal active-set method for ``min ||Ay - b||^2`` subject to ``lo <= y <= hi``.

    Returns ``(y, multipliers)``; a multiplier is nonnegative for every knot
    held at a bound and zero for free knots.
    """
    n = A.shape[1]
    y = np.clip(_qr_solve(A, b, np.arange(n)), lo, hi)
    at_lo = y <= lo
    at_hi = y >= hi
    scale = max(1.0, float(np.max(np.abs(A.T @ b))))
    for _ in range(max_iter):
        free = ~(at_lo | at_hi)
        z = _solve_subset(A, b, free, y)
        over = free & ((z < lo) | (z > hi))
        if over.any():
            # step from y toward z until the first free knot meets a bound
            steps = np.ones(n)
            d = z - y
            dn = over & (z < lo)
            up = over & (z > hi)
            steps[dn] = (lo[dn] - y[dn]) / d[dn]
            steps[up] = (hi[up] - y[up]) / d[up]
            step = float(np.clip(steps[over].min(), 0.0, 1.0))
            y = np.where(free, y + step * d, y)
            hit = over & (steps <= step)
            y[hit & dn] = lo[hit & dn]
            y[hit & up] = hi[hit & up]
            at_lo |= hit & dn
            at_hi |= hit & up
            continue
        y = z
        grad = 2.0 * (A.T @ (A @ y - b))
        mult = np.zeros(n)
        mult[at_lo] = grad[at_lo]
        mult[at_hi] = -grad[at_hi]
        worst = int(np.argmin(mult))
        if mult[worst] >= -1e-12 * scale:
            return y, np.maximum(mult, 0.0)
        at_lo[worst] = at_hi[worst] = False
    raise HifError("bounded least squares did not settle within the iteration cap")


def _solve(design: DesignMatrix, bounds: Optional[FitBounds], ridge: bool, cls):
    A, b = design.A, design.b
    n = A.shape[1]
    lo, hi = (bounds or FitBounds()).arrays(n)
    A_s, b_s = (A, b)
    used_ridge = False
    try:
        _qr_solve(A, b, np.arange(n))
    except SingularNormalEquations:
        if not ridge:
            raise
        A_s, b_s = _ridge_augment(A, b)
        used_ridge = True
    if np.all(np.isinf(lo)) and np.all(np.isinf(hi)):
        y = _qr_solve(A_s, b_s, np.arange(n))
        mult = np.zeros(n)
    else:
        y, mult = _bounded_lsq(A_s, b_s, lo, hi)
    r = A @ y - b
    return cls(design.grid, y, float(r @ r), mult, used_ridge)


def solve_linear_fit(design: DesignMatrix, bounds: Optional[FitBounds] = None,
                     ridge: bool = False) -> LinearFit:
    """Least-squares knot voltages for a piecewise linear design.

    With ``ridge=True`` a rank-deficient design is regularized by a tiny
    Tikhonov term instead of raising.
    """
    if design.mode != "linear":
        raise GridMismatch("expected a linear design")
    return _solve(design, bounds, ridge, LinearFit)


def solve_quadratic_fit(design: DesignMatrix, bounds: Optional[FitBounds] = None,
                        ridge: bool = False) -> QuadFit:
    if design.mode != "quadratic":
        raise GridMismatch("expected a quadratic design")
    return _solve(design, bounds, ridge, QuadFit)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate_fit(fit: Fit, x):
    """Evaluate the fitted function; interior knots belong to the left piece.

    Points outside the grid are extrapolated from the end pieces with an
    ``ExtrapolationWarning``.
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    outer = fit.grid.outer
    if np.any((x < outer[0]) | (x > outer[-1])):
        warnings.warn("evaluating outside the breakpoint grid", ExtrapolationWarning, stacklevel=2)
    piece = np.clip(np.searchsorted(outer, x, side="left") - 1, 0, fit.grid.n_pieces - 1)
    out = np.zeros_like(x)
    for k in range(fit.grid.n_pieces):
        sel = piece == k
        if not sel.any():
            continue
        knots, weights = _piece_weights(fit.grid, k, x[sel])
        acc = np.zeros(int(sel.sum()))
        for j, w in zip(knots, weights):
            acc = acc + fit.knots[j] * w
        out[sel] = acc
    return float(out[0]) if scalar else out


def fit_residual(fit: Fit, seg: Segmentation) -> float:
    """Sum of squared voltage errors over every segmented sample."""
    if seg.grid != fit.grid:
        raise GridMismatch("fit and segmentation use different grids")
    total = 0.0
    for k in range(seg.grid.n_pieces):
        I, V = seg.currents[k], seg.voltages[k]
        if len(I):
            knots, weights = _piece_weights(fit.grid, k, I)
            pred = np.zeros(len(I))
            for j, w in zip(knots, weights):
                pred = pred + fit.knots[j] * w
            r = pred - V
            total += float(r @ r)
    return total
