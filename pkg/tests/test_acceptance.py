"""Acceptance checks; each prints one PASS/FAIL line with its tolerance.

The simulation studies take a few minutes in total on one core.  Run alone
with ``pytest -s tests/test_acceptance.py`` to watch the lines as they come.
"""

import time

import numpy as np
import pytest

from pairfuse import admm, pathsel
from pairfuse.core import PenaltySpec, SolverConfig, make_dataset, num_pairs
from pairfuse.penalty import penalty_value, prox_eta
from pairfuse.simulate import MethodSpec, StudySpec, gen_example, run_study

pytestmark = pytest.mark.slow

RESULTS = []


def report(num, ok, detail):
    line = f"criterion {num:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    RESULTS.append(line)
    assert ok, line


def dense_delta(n):
    i, j = np.triu_indices(n, 1)
    D = np.zeros((i.size, n))
    D[np.arange(i.size), i] = 1.0
    D[np.arange(i.size), j] = -1.0
    return D


def grid_argmin(spec, vt, delta, levels=3, points=4001):
    # coarse-to-fine scan of the scalar eta objective on [min(0, d), max(0, d)] padded
    lo, hi = min(0.0, delta) - 0.5, max(0.0, delta) + 0.5
    for _ in range(levels):
        g = np.linspace(lo, hi, points)
        g = np.append(g, [0.0, delta])
        vals = 0.5 * vt * (delta - g) ** 2 + penalty_value(spec, np.abs(g))
        best = g[np.argmin(vals)]
        step = (hi - lo) / (points - 1)
        lo, hi = best - 2 * step, best + 2 * step
    return best


# ------------------------------------------------------------------ 1

def test_criterion_01_prox_oracle():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for fam in ("L1", "MCP", "SCAD"):
        for _ in range(1000):
            vt = float(rng.uniform(0.2, 3.0))
            lam = float(rng.uniform(0.05, 2.0))
            if fam == "MCP":
                gamma = 1.0 / vt + float(rng.uniform(0.05, 4.0))
            elif fam == "SCAD":
                gamma = 1.0 + 1.0 / vt + float(rng.uniform(0.05, 4.0))
            else:
                gamma = None
            spec = PenaltySpec(fam, lam, gamma)
            scale = lam * (gamma or 1.0) * 1.5 + lam / vt
            delta = float(rng.uniform(-scale, scale))
            got = prox_eta(delta, spec, vt)
            worst = max(worst, abs(got - grid_argmin(spec, vt, delta)))
    elapsed = time.perf_counter() - t0
    report(1, worst <= 2e-5 and elapsed < 10,
           f"max |prox - grid argmin| = {worst:.2e} (tol 2e-5) over 3x1000 draws, {elapsed:.1f} s (< 10 s)")


# ------------------------------------------------------------------ 2

def test_criterion_02_linear_algebra():
    rng = np.random.default_rng(102)
    t0 = time.perf_counter()
    worst = 0.0
    identity_ok = True
    done = 0
    while done < 200:
        n, p = int(rng.integers(3, 31)), int(rng.integers(0, 6))
        if p >= n - 1:
            continue
        vt = float(rng.uniform(0.3, 3.0))
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        ds = make_dataset(y, X)
        ws = admm.precompute(ds, SolverConfig(vt))
        eta = rng.standard_normal(num_pairs(n))
        ups = rng.standard_normal(num_pairs(n))
        mu, beta = admm.update_mu_beta(ws, y, eta, ups)
        # joint normal equations in (mu, beta), no profiling and no Woodbury
        D = dense_delta(n)
        A = np.block([[np.eye(n) + vt * D.T @ D, X], [X.T, X.T @ X]])
        b = np.concatenate([y + D.T @ (vt * eta - ups), X.T @ y])
        ref = np.linalg.solve(A, b)
        worst = max(worst, float(np.abs(mu - ref[:n]).max()),
                    float(np.abs(beta - ref[n:]).max()) if p else 0.0)
        # integer Gram identity makes I + vt D'D = (1 + n vt) I - vt 11' exact for every vt
        identity_ok &= np.array_equal(D.T @ D, n * np.eye(n) - np.ones((n, n)))
        lhs = np.eye(n) + vt * D.T @ D
        rhs = (1 + n * vt) * np.eye(n) - vt * np.ones((n, n))
        identity_ok &= bool(np.abs(lhs - rhs).max() <= 4 * np.finfo(float).eps * (1 + n * vt))
        done += 1
    elapsed = time.perf_counter() - t0
    report(2, worst <= 1e-8 and identity_ok and elapsed < 5,
           f"max |low-rank - dense| = {worst:.2e} (tol 1e-8), identity exact = {identity_ok}, "
           f"{elapsed:.1f} s (< 5 s)")


# ------------------------------------------------------------------ 3

def test_criterion_03_residual_convergence():
    primal_bad, dual_bad, worst_dual, worst_iters = 0, 0, 0.0, 0
    for seed in range(50):
        ds = gen_example(StudySpec("1", alpha=1.0, seed=3000 + seed), 0)
        for fam in ("MCP", "SCAD"):
            f = pathsel.select_lambda(pathsel.solution_path(ds, PenaltySpec(fam), c=10), ds).best.fit
            worst_dual = max(worst_dual, f.dual_residual_norm / f.tol)
            worst_iters = max(worst_iters, f.iters)
            primal_bad += not (f.converged and f.primal_residual_norm < f.tol and f.iters <= 1000)
            dual_bad += not f.dual_residual_norm < 10 * f.tol
    report(3, primal_bad == 0 and dual_bad == 0,
           f"primal < tol within 1000 iters: {100 - primal_bad}/100 (max iters {worst_iters}); "
           f"dual < 10 tol: {100 - dual_bad}/100 (max dual/tol {worst_dual:.1f})")


# ------------------------------------------------------------------ 4-7

@pytest.fixture(scope="module")
def table1_alpha2():
    spec = StudySpec("1", n=100, alpha=2.0, reps=100, seed=42,
                     methods=(MethodSpec("MCP", c=10), MethodSpec("oracle")))
    return run_study(spec)


def test_criterion_04_number_of_groups(table1_alpha2):
    k = table1_alpha2.method("MCP(c=10)")["k_hat"]
    report(4, 1.90 <= k["mean"] <= 2.15 and k["median"] == 2,
           f"mean K = {k['mean']:.3f} (in [1.90, 2.15]), median {k['median']:g} (= 2)")


def test_criterion_05_rmse(table1_alpha2):
    t = table1_alpha2.method("MCP(c=10)")
    m, b = t["rmse_mu"]["mean"], t["rmse_beta"]["mean"]
    report(5, 0.10 <= m <= 0.25 and 0.03 <= b <= 0.10,
           f"mean rmse_mu = {m:.4f} (in [0.10, 0.25]), mean rmse_beta = {b:.4f} (in [0.03, 0.10])")


def test_criterion_06_oracle_calibration(table1_alpha2):
    t = table1_alpha2.method("ORACLE")
    ase, ese = np.array(t["alpha_ase"]), np.array(t["alpha_ese"])
    ok = bool(np.all(np.abs(ase - ese) < 0.02) and np.all((ase >= 0.06) & (ase <= 0.09)))
    report(6, ok, f"ASE = {np.round(ase, 4).tolist()}, ESE = {np.round(ese, 4).tolist()} "
                  f"(|ASE - ESE| < 0.02, ASE in [0.06, 0.09])")


def test_criterion_07_test_power():
    spec = StudySpec("1", n=100, alpha=1.0, reps=100, seed=43, methods=(MethodSpec("MCP", c=10),))
    p = run_study(spec).method("MCP(c=10)")["p_diff"]["mean"]
    report(7, p < 1e-3, f"mean p-value for alpha_1 = alpha_2 is {p:.3e} (< 0.001)")


# ------------------------------------------------------------------ 8

def test_criterion_08_clustering_accuracy():
    spec = StudySpec("4-case1", n=100, reps=100, seed=44,
                     methods=(MethodSpec("MCP"), MethodSpec("TruncatedL1", tau=1.0)))
    s = run_study(spec)
    ri_mcp = s.method("MCP(c=5)")["rand_index"]["mean"]
    ri_tl1 = s.method("TruncatedL1(tau=1, c=5)")["rand_index"]["mean"]
    report(8, 0.85 <= ri_mcp <= 0.94 and 0.82 <= ri_tl1 <= 0.92,
           f"mean RI MCP = {ri_mcp:.4f} (in [0.85, 0.94]), truncated L1 = {ri_tl1:.4f} (in [0.82, 0.92])")


# ------------------------------------------------------------------ 9

def test_criterion_09_degenerate_limits():
    rng = np.random.default_rng(109)
    worst, multi = 0.0, 0
    for _ in range(50):
        n, p = int(rng.integers(10, 61)), int(rng.integers(0, 6))
        X = rng.standard_normal((n, p))
        y = rng.normal(0, 2, n) + X @ rng.uniform(-1, 1, p)
        ds = make_dataset(y, X)
        cfg = SolverConfig()
        for fam in ("L1", "MCP", "SCAD"):
            lmax = pathsel.find_lambda_max(ds, PenaltySpec(fam), cfg)
            f = admm.fit(ds, PenaltySpec(fam, 2.0 * lmax), cfg)
            part = pathsel.extract_partition(f)
            multi += part.k_hat != 1
            coef = np.linalg.lstsq(np.column_stack([np.ones(n), X]), y, rcond=None)[0]
            err = abs(part.alpha[0] - coef[0])
            if p:
                err = max(err, float(np.abs(f.beta - coef[1:]).max()))
            worst = max(worst, err)
    ds = gen_example(StudySpec("1", seed=9), 0)
    a = admm.fit(ds, PenaltySpec("WeightedL1", 0.3, phi=0.0))
    b = admm.fit(ds, PenaltySpec("L1", 0.3))
    bitwise = a.mu.tobytes() == b.mu.tobytes() and a.eta.tobytes() == b.eta.tobytes()
    report(9, multi == 0 and worst <= 1e-4 and bitwise,
           f"{150 - multi}/150 fits at 2 lambda_max have K = 1, max |(alpha, beta) - OLS| = {worst:.2e} "
           f"(tol 1e-4), phi = 0 weighted L1 bitwise equal to L1: {bitwise}")


# ------------------------------------------------------------------ 10

def test_criterion_10_path_shape():
    ds = gen_example(StudySpec("1", alpha=1.0, seed=2016), 0)
    grid = np.round(np.arange(0.01, 1.2001, 0.01), 10)
    ks = pathsel.solution_path(ds, PenaltySpec("MCP"), grid=grid).k_hats
    runs, start = [], None
    for k in range(grid.size):
        if ks[k] == 2 and start is None:
            start = k
        if start is not None and (k == grid.size - 1 or ks[k + 1] != 2):
            runs.append((grid[start], grid[k]))
            start = None
    ok = any(0.2 <= lo <= 0.55 and 0.45 <= hi <= 0.9 for lo, hi in runs)
    report(10, ok, f"MCP K = 2 on lambda intervals {[(float(a), float(b)) for a, b in runs]} "
                   f"(need lower edge in [0.2, 0.55], upper in [0.45, 0.9])")


# ------------------------------------------------------------------ 11

def test_criterion_11_homogeneity():
    lams = (0.15, 0.20, 0.25)
    spec = StudySpec("3", n=100, reps=100, seed=45,
                     methods=tuple(MethodSpec("MCP", lam=l) for l in lams))
    s = run_study(spec)
    med = {l: s.method(f"MCP(lambda={l:g})")["p_hetero"]["median"] for l in lams}
    used = {l: s.method(f"MCP(lambda={l:g})")["p_hetero"]["count"] for l in lams}
    ok = all(m is not None and m > 0.1 for m in med.values())
    report(11, ok, "median heterogeneity p-value " +
           ", ".join(f"lambda={l:g}: {med[l]:.3f} ({used[l]} reps with K >= 2)" for l in lams)
           + " (each > 0.1)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
