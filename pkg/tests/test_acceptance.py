"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The verdicts are also collected into an "acceptance criteria" section of the
pytest terminal summary.
"""
import time

import numpy as np
from scipy.stats import spearmanr

import oracles
from hifloc import io
from hifloc.config import validate
from hifloc.pipeline import cmd_eval, cmd_fit, cmd_simulate, cmd_train
from hifloc.piecewise import (
    _piece_weights,
    build_linear_design,
    build_quadratic_design,
    solve_linear_fit,
    solve_quadratic_fit,
)
from hifloc.prep import BreakpointGrid, segment_samples
from hifloc.sim import FaultScenario, HifCircuitParams, SourceSpec, Trajectory, simulate_hif_trajectory
from hifloc.svm import KernelSpec, decision_value, dual_objective, gram_matrix, load_model, \
    save_model, train_binary_svm


def _seg(I, V, grid):
    return segment_samples(Trajectory(np.arange(len(I), dtype=float), I, V), grid)


def _normal_eq_rel(design, y):
    g = design.A.T @ (design.A @ y - design.b)
    scale = np.linalg.norm(design.A) * (np.linalg.norm(design.A) * np.linalg.norm(y) + np.linalg.norm(design.b))
    return float(np.max(np.abs(g)) / scale)


def _oracle_protocol(mode, n_datasets=200, seed=1):
    """Closed-form vs numeric minimizer; returns (worst obj gap, worst normal-eq, solve seconds, fits)."""
    rng = np.random.default_rng(seed)
    worst_gap = worst_ne = 0.0
    solve_time = 0.0
    fits = []
    for _ in range(n_datasets):
        outer, I, V = oracles.random_dataset(rng, n_max=60, per_piece_min=3)
        if mode == "linear":
            grid, build, solve, objective, n = (BreakpointGrid(tuple(outer)), build_linear_design,
                                                solve_linear_fit, oracles.linear_objective, 4)
        else:
            grid, build, solve, objective, n = (BreakpointGrid.from_outer(outer, "quadratic"),
                                                build_quadratic_design, solve_quadratic_fit,
                                                oracles.quad_objective, 7)
        t0 = time.perf_counter()
        design = build(_seg(I, V, grid), grid)
        fit = solve(design)
        solve_time += time.perf_counter() - t0
        _, best = oracles.numeric_min(lambda y: objective(y, grid.xs, I, V), n)
        worst_gap = max(worst_gap, abs(fit.residual - best) / max(best, 1e-300))
        worst_ne = max(worst_ne, _normal_eq_rel(design, fit.knots))
        fits.append((outer, I, V, fit))
    return worst_gap, worst_ne, solve_time, fits


def test_criterion_1_linear_oracle(acceptance):
    gap, ne, secs, _ = _oracle_protocol("linear")
    ok = gap <= 1e-6 and ne <= 1e-8 and secs < 1.0
    acceptance(1, ok, f"linear LS oracle: worst objective gap {gap:.2e} (<= 1e-6), "
                      f"normal-eq residual {ne:.2e} (<= 1e-8), closed form {secs:.3f} s (< 1 s) over 200 datasets")
    assert ok


def test_criterion_2_quadratic_oracle(acceptance):
    gap, ne, secs, fits = _oracle_protocol("quadratic")
    worst_excess = -np.inf
    for outer, I, V, qfit in fits:
        grid = BreakpointGrid(tuple(outer))
        lin = solve_linear_fit(build_linear_design(_seg(I, V, grid), grid))
        worst_excess = max(worst_excess, qfit.residual - lin.residual)
    ok = gap <= 1e-6 and ne <= 1e-8 and worst_excess <= 1e-9
    acceptance(2, ok, f"quadratic LS oracle: worst objective gap {gap:.2e} (<= 1e-6), normal-eq residual "
                      f"{ne:.2e} (<= 1e-8), max quad - linear residual {worst_excess:.2e} (<= 1e-9)")
    assert ok


def test_criterion_3_exact_recovery(acceptance):
    I = np.linspace(-4.0, 7.0, 45)
    grid = BreakpointGrid((-4.0, -0.5, 3.0, 7.0))
    lin = solve_linear_fit(build_linear_design(_seg(I, 2 * I + 1, grid), grid))
    qgrid = BreakpointGrid.from_outer(grid.xs, "quadratic")
    quad = solve_quadratic_fit(build_quadratic_design(_seg(I, I**2, qgrid), qgrid))
    ds = float(np.max(np.abs(lin.slopes - 2)))
    dm = float(np.max(np.abs(quad.coeffs[:, 0] - 1)))
    dn = float(np.max(np.abs(quad.coeffs[:, 1])))
    ok = max(ds, dm, dn) <= 1e-9
    acceptance(3, ok, f"exact recovery: |s-2| {ds:.1e}, |m-1| {dm:.1e}, |n| {dn:.1e} (all <= 1e-9)")
    assert ok


def test_criterion_4_continuity_no_c1(acceptance):
    rng = np.random.default_rng(4)
    mismatches = 0
    checked = 0
    for _ in range(100):
        outer, I, V = oracles.random_dataset(rng)
        for grid, build, solve in ((BreakpointGrid(tuple(outer)), build_linear_design, solve_linear_fit),
                                   (BreakpointGrid.from_outer(outer, "quadratic"), build_quadratic_design,
                                    solve_quadratic_fit)):
            fit = solve(build(_seg(I, V, grid), grid))
            for k in range(grid.n_pieces - 1):
                x = np.array([grid.outer[k + 1]])
                left_knots, wl = _piece_weights(grid, k, x)
                right_knots, wr = _piece_weights(grid, k + 1, x)
                left = sum(fit.knots[j] * w for j, w in zip(left_knots, wl))[0]
                right = sum(fit.knots[j] * w for j, w in zip(right_knots, wr))[0]
                mismatches += left != right
                checked += 1
    I = np.linspace(0.0, 9.0, 46)
    V = np.where(I <= 3, I, 3 + 0.2 * (I - 3))
    grid = BreakpointGrid((0.0, 3.0, 6.0, 9.0))
    s = solve_linear_fit(build_linear_design(_seg(I, V, grid), grid)).slopes
    ok = mismatches == 0 and s[0] != s[1]
    acceptance(4, ok, f"continuity: {mismatches}/{checked} interior-knot left/right mismatches (need 0); "
                      f"kinked data s1={s[0]:.6g}, s2={s[1]:.6g} (must differ)")
    assert ok


def _kkt_violation(model, X, y):
    a = np.zeros(len(y))
    a[model.support_indices] = model.alphas
    m = y * decision_value(model, X)
    C = model.C
    v = np.where(a <= 0, 1 - m, np.where(a >= C, m - 1, np.abs(m - 1)))
    return float(max(v.max(), 0.0))


def test_criterion_5_svm_kkt(acceptance):
    rng = np.random.default_rng(5)
    kernels = [KernelSpec("linear"), KernelSpec("gaussian", gamma=0.5), KernelSpec("polynomial", degree=3)]
    worst = 0.0
    unconverged = 0
    for k in range(50):
        n = int(rng.integers(12, 60))
        y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        # even k: well-separated blobs; odd k: overlapping clouds
        sep = 4.0 if k % 2 == 0 else 0.5
        X = rng.normal(size=(n, 3)) + sep * y[:, None] * np.array([1.0, 0.0, 0.0])
        C = float(rng.choice([0.1, 1.0, 10.0]))
        model = train_binary_svm(X, y, kernels[k % 3], C=C, tol=1e-3)
        unconverged += not model.converged
        worst = max(worst, _kkt_violation(model, X, y))
    dual_gap = 0.0
    for k in range(30):
        n = int(rng.integers(2, 7))
        y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        X = rng.normal(size=(n, 2))
        spec = kernels[k % 3]
        C = float(rng.choice([0.5, 1.0, 5.0]))
        model = train_binary_svm(X, y, spec, C=C, tol=1e-6)
        K = gram_matrix(spec.resolved(X), X, X)
        a = np.zeros(n)
        a[model.support_indices] = model.alphas
        best, _ = oracles.svm_dual_by_enumeration(K, y, C)
        dual_gap = max(dual_gap, abs(dual_objective(a, y, K) - best))
    ok = worst <= 1e-3 and dual_gap <= 1e-4 and unconverged == 0
    acceptance(5, ok, f"SVM KKT: worst violation {worst:.2e} over 50 sets (<= 1e-3), {unconverged} unconverged; "
                      f"dual vs brute force max gap {dual_gap:.2e} on 30 sets of <= 6 points (<= 1e-4)")
    assert ok


def _study(config, tmp_path):
    cmd_simulate(config, tmp_path / "data")
    trajs = io.read_dataset(tmp_path / "data")
    summary = cmd_fit(trajs, config, tmp_path / "fit")
    model, report = cmd_train(tmp_path / "fit" / "features.csv", config, tmp_path / "train")
    return summary, model, report


FAR_APART = [{"label": 7, "series_resistance": 5.0, "series_reactance": 1.0},
             {"label": 64, "series_resistance": 60.0, "series_reactance": 12.0},
             {"label": 82, "series_resistance": 150.0, "series_reactance": 30.0}]


def test_criterion_6_far_apart(acceptance, tmp_path):
    config = validate({"simulation": {"per_class": 50, "eta": 0.01, "scenarios": FAR_APART},
                       "svm": {"kernel": "linear"}, "eval": {"split_fraction": 0.3}})
    t0 = time.perf_counter()
    summary, _, report = _study(config, tmp_path)
    secs = time.perf_counter() - t0
    ok = report["accuracy"] >= 0.95 and secs < 30 and summary.n_failed == 0
    acceptance(6, ok, f"far-apart localization: test accuracy {report['accuracy']:.3f} (>= 0.95) on "
                      f"{report['n_test']} held-out trajectories, {secs:.1f} s (< 30 s)")
    assert ok


def test_criterion_7_same_branch(acceptance, tmp_path):
    chain = {"count": 6, "first_label": 18, "r_start": 5.0, "r_step": 30.0, "x_ratio": 0.2}
    config = validate({"simulation": {"per_class": 50, "eta": 0.01, "chain": chain},
                       "svm": {"kernel": "polynomial", "degree": 3, "coef0": 1.0}})
    summary, _, report = _study(config, tmp_path)
    labels, X = io.read_features_csv(tmp_path / "fit" / "features.csv")
    scen = config.scenarios()
    z = np.array([np.hypot(s.series_resistance, s.series_reactance) for s in scen])
    mean_s1 = np.array([X[labels == s.location_label, 0].mean() for s in scen])
    rho = spearmanr(mean_s1, z).statistic
    z_per = z[np.searchsorted([s.location_label for s in scen], labels)]
    rho_per = spearmanr(X[:, 0], z_per).statistic
    ok = report["accuracy"] >= 0.80 and rho > 0.9 and summary.n_failed == 0
    acceptance(7, ok, f"same-branch localization: test accuracy {report['accuracy']:.3f} (>= 0.80); Spearman "
                      f"of per-location mean s1 vs |Z| {rho:.3f} (> 0.9); per-trajectory {rho_per:.3f} (info)")
    assert ok


def test_criterion_8_dead_band(acceptance):
    n_checked = 0
    conducting_in_band = 0
    for seed in range(3):
        c = HifCircuitParams(4000.0, -3500.0, 200.0, 260.0, 0.05)
        traj = simulate_hif_trajectory(c, SourceSpec(10_000.0, 60.0, 20_000.0, 3), FaultScenario(1, 20.0, 4.0), seed)
        vf = traj.fault_voltage
        band = (vf >= c.v_n) & (vf <= c.v_p)
        conducting_in_band += int(np.count_nonzero(traj.i[band]))
        n_checked += len(traj)
    sym = HifCircuitParams(100.0, -100.0, 25.0, 25.0, 0.0)
    traj = simulate_hif_trajectory(sym, SourceSpec(150.0, 50.0, 20_000.0, 3), FaultScenario(1, 4.0, 2.0), 0)
    half = 200  # 50 Hz at 20 kHz
    anti = float(np.max(np.abs(traj.i[half:] + traj.i[:-half])))
    ok = n_checked >= 1000 and conducting_in_band == 0 and anti <= 1e-9
    acceptance(8, ok, f"dead band: {conducting_in_band} non-zero currents in band over {n_checked} samples "
                      f"(need 0); half-wave antisymmetry error {anti:.1e} (<= 1e-9)")
    assert ok


def _tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file() and "timing" not in p.name}


def test_criterion_9_determinism(acceptance, tmp_path):
    config = validate({"simulation": {"per_class": 10, "scenarios": FAR_APART}})
    _study(config, tmp_path / "a")
    _, model, _ = _study(config, tmp_path / "b")
    same_data = _tree_bytes(tmp_path / "a" / "data") == _tree_bytes(tmp_path / "b" / "data")
    same_report = all((tmp_path / "a" / "train" / f).read_bytes() == (tmp_path / "b" / "train" / f).read_bytes()
                      for f in ("report.json", "model.json"))
    save_model(model, tmp_path / "copy.json")
    back = load_model(tmp_path / "copy.json")
    _, X = io.read_features_csv(tmp_path / "b" / "fit" / "features.csv")
    Xq = np.vstack([X, X * 1.01 + 0.5])
    same_decisions = np.array_equal(model.decision_matrix(Xq), back.decision_matrix(Xq))
    ok = same_data and same_report and same_decisions
    acceptance(9, ok, f"determinism: dataset identical={same_data}, report/model identical={same_report}, "
                      f"decision values bitwise after save/load={same_decisions}")
    assert ok


def test_criterion_10_scale(acceptance, tmp_path):
    chain = {"count": 66, "first_label": 1, "r_start": 5.0, "r_step": 5.0, "x_ratio": 0.2}
    config = validate({"simulation": {"per_class": 20, "chain": chain}})
    t0 = time.perf_counter()
    summary, _, report = _study(config, tmp_path)
    ev = cmd_eval(tmp_path / "train" / "model.json", tmp_path / "train" / "test_features.csv")
    secs = time.perf_counter() - t0
    ok = secs < 60 and summary.n_ok == 66 * 20 and ev["accuracy"] == report["accuracy"]
    acceptance(10, ok, f"scale: 66 x 20 simulate/fit/train/eval in {secs:.1f} s (< 60 s), "
                       f"{summary.n_ok} fitted, test accuracy {report['accuracy']:.3f} (info)")
    assert ok
