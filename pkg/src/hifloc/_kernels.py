"""Hot numeric kernels.

Each kernel exists twice: a loop version compiled with numba (``*_nb``) and a
vectorized numpy version (``*_np``). The public name is bound to one of the two
at import time according to ``hifloc._accel.USE_NUMBA``. Both versions perform
the same floating point operations in the same order, so they agree to the
last bit on everything the test-suite checks.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

KERNEL_LINEAR = 0
KERNEL_POLY = 1
KERNEL_GAUSSIAN = 2

TAU = 1e-12


# ---------------------------------------------------------------------------
# two-diode arc stepping
# ---------------------------------------------------------------------------

def _arc_steps_np(drive, v_p, v_n, r_p, r_n, series_r, series_x):
    """Fault current and fault-point voltage for every step.

    ``drive`` is the source voltage seen at the fault point, ``r_p``/``r_n``
    the per-step (possibly jittered) branch resistances.
    """
    z_p = np.hypot(series_r + r_p, series_x)
    z_n = np.hypot(series_r + r_n, series_x)
    pos = drive > v_p
    neg = (drive < v_n) & ~pos
    current = np.zeros_like(drive)
    current[pos] = (drive[pos] - v_p) / z_p[pos]
    current[neg] = (drive[neg] - v_n) / z_n[neg]
    v_fault = drive.copy()
    v_fault[pos] = v_p + r_p[pos] * current[pos]
    v_fault[neg] = v_n + r_n[neg] * current[neg]
    return current, v_fault


@njit
def _arc_steps_nb(drive, v_p, v_n, r_p, r_n, series_r, series_x):
    n = drive.shape[0]
    current = np.zeros(n)
    v_fault = np.empty(n)
    for k in range(n):
        e = drive[k]
        if e > v_p:
            z = math.hypot(series_r + r_p[k], series_x)
            i = (e - v_p) / z
            current[k] = i
            v_fault[k] = v_p + r_p[k] * i
        elif e < v_n:
            z = math.hypot(series_r + r_n[k], series_x)
            i = (e - v_n) / z
            current[k] = i
            v_fault[k] = v_n + r_n[k] * i
        else:
            v_fault[k] = e
    return current, v_fault


# ---------------------------------------------------------------------------
# Gram matrices
# ---------------------------------------------------------------------------

def _gram_np(X1, X2, kind, gamma, degree, coef0):
    if kind == KERNEL_GAUSSIAN:
        diff = X1[:, None, :] - X2[None, :, :]
        return np.exp(-gamma * np.sum(diff * diff, axis=2))
    dot = np.sum(X1[:, None, :] * X2[None, :, :], axis=2)
    if kind == KERNEL_POLY:
        return (dot + coef0) ** degree
    return dot


@njit
def _gram_nb(X1, X2, kind, gamma, degree, coef0):
    n1, d = X1.shape
    n2 = X2.shape[0]
    out = np.empty((n1, n2))
    for a in range(n1):
        for c in range(n2):
            acc = 0.0
            if kind == KERNEL_GAUSSIAN:
                for k in range(d):
                    t = X1[a, k] - X2[c, k]
                    acc += t * t
                out[a, c] = math.exp(-gamma * acc)
            else:
                for k in range(d):
                    acc += X1[a, k] * X2[c, k]
                if kind == KERNEL_POLY:
                    out[a, c] = (acc + coef0) ** degree
                else:
                    out[a, c] = acc
    return out


# ---------------------------------------------------------------------------
# SMO with second-order working-set selection
# ---------------------------------------------------------------------------
# Minimizes 0.5 a'Qa - sum(a), Q_ij = y_i y_j K_ij, 0 <= a <= C, y'a = 0.
# Returns (alpha, rho, iterations, converged); the decision function is
# sum_j a_j y_j K(x_j, x) - rho.

def _smo_np(K, y, C, eps, max_iter):
    n = y.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.diag(K).copy()
    it = 0
    converged = False
    while it < max_iter:
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        cand = np.where(up, yg, -np.inf)
        i = int(np.argmax(cand))
        gmax = cand[i]
        gmin = np.min(np.where(low, yg, np.inf))
        if gmax - gmin < eps:
            converged = True
            break
        b = gmax - yg
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a <= 0.0, TAU, a)
        obj = np.where(low & (b > 0.0), -(b * b) / a, np.inf)
        j = int(np.argmin(obj))
        if not np.isfinite(obj[j]):
            converged = True
            break
        ai_old, aj_old = _smo_pair_update(alpha, y, K, diag, grad, i, j, C)
        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        grad += y * (K[:, i] * (y[i] * dai) + K[:, j] * (y[j] * daj))
        it += 1
    return alpha, _rho_np(alpha, y, grad, C), it, converged


def _rho_np(alpha, y, grad, C):
    yg = y * grad
    at_upper = alpha >= C
    at_lower = alpha <= 0.0
    free = ~at_upper & ~at_lower
    if free.any():
        return float(np.sum(yg[free]) / np.count_nonzero(free))
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = np.min(yg[ub_mask]) if ub_mask.any() else np.inf
    lb = np.max(yg[lb_mask]) if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


def _smo_pair_update(alpha, y, K, diag, grad, i, j, C):
    """Analytic two-variable step with box clipping (in place)."""
    ai_old = alpha[i]
    aj_old = alpha[j]
    if y[i] != y[j]:
        quad = diag[i] + diag[j] + 2.0 * (y[i] * y[j] * K[i, j])
        if quad <= 0.0:
            quad = TAU
        delta = (-grad[i] - grad[j]) / quad
        diff = ai_old - aj_old
        ai = ai_old + delta
        aj = aj_old + delta
        if diff > 0.0:
            if aj < 0.0:
                aj = 0.0
                ai = diff
        else:
            if ai < 0.0:
                ai = 0.0
                aj = -diff
        if diff > 0.0:
            if ai > C:
                ai = C
                aj = C - diff
        else:
            if aj > C:
                aj = C
                ai = C + diff
    else:
        quad = diag[i] + diag[j] - 2.0 * (y[i] * y[j] * K[i, j])
        if quad <= 0.0:
            quad = TAU
        delta = (grad[i] - grad[j]) / quad
        total = ai_old + aj_old
        ai = ai_old - delta
        aj = aj_old + delta
        if total > C:
            if ai > C:
                ai = C
                aj = total - C
        else:
            if aj < 0.0:
                aj = 0.0
                ai = total
        if total > C:
            if aj > C:
                aj = C
                ai = total - C
        else:
            if ai < 0.0:
                ai = 0.0
                aj = total
    alpha[i] = ai
    alpha[j] = aj
    return ai_old, aj_old


_smo_pair_update_nb = njit(_smo_pair_update)


@njit
def _smo_nb(K, y, C, eps, max_iter):
    n = y.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.empty(n)
    for t in range(n):
        diag[t] = K[t, t]
    it = 0
    converged = False
    while it < max_iter:
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                v = -y[t] * grad[t]
                if v > gmax:
                    gmax = v
                    i = t
        gmin = np.inf
        j = -1
        obj_min = np.inf
        any_low = False
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                any_low = True
                v = -y[t] * grad[t]
                if v < gmin:
                    gmin = v
                if i >= 0:
                    b = gmax - v
                    if b > 0.0:
                        a = diag[i] + diag[t] - 2.0 * K[i, t]
                        if a <= 0.0:
                            a = TAU
                        o = -(b * b) / a
                        if o < obj_min:
                            obj_min = o
                            j = t
        if i < 0 or not any_low:
            converged = True
            break
        if gmax - gmin < eps:
            converged = True
            break
        if j < 0:
            converged = True
            break
        ai_old, aj_old = _smo_pair_update_nb(alpha, y, K, diag, grad, i, j, C)
        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        ci = y[i] * dai
        cj = y[j] * daj
        for t in range(n):
            grad[t] += y[t] * (K[t, i] * ci + K[t, j] * cj)
        it += 1

    # bias
    sum_free = 0.0
    n_free = 0
    ub = np.inf
    lb = -np.inf
    for t in range(n):
        yg = y[t] * grad[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0.0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            sum_free += yg
    if n_free > 0:
        rho = sum_free / n_free
    else:
        rho = (ub + lb) / 2.0
    return alpha, rho, it, converged


if USE_NUMBA:
    arc_steps = _arc_steps_nb
    gram = _gram_nb
    smo = _smo_nb
else:
    arc_steps = _arc_steps_np
    gram = _gram_np
    smo = _smo_np
