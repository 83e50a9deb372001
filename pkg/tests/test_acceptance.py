"""Acceptance criteria, one test per criterion.

Each test prints a single ``ACCEPTANCE <k> PASS|FAIL: ...`` line (also
collected into the pytest terminal summary).  Criteria that cannot be met
are kept as strict expected failures: the printed line still says FAIL.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, naive_log_post
from motifgibbs.cli import SMOKE_DATASETS, smoke_cells
from motifgibbs.collapsed import bottleneck_d, collapse, collapsed_posterior, projection_matrix
from motifgibbs.datagen import (
    calibrate_dirichlet_concentration,
    deterministic_model,
    median_max_dirichlet,
    sample_sequence,
)
from motifgibbs.diagnostics import run_table1_cell, study_concentrations
from motifgibbs.gibbs import state_code
from motifgibbs.landscape import LandscapeGrid, find_local_maxima
from motifgibbs.model import ModelParams, Sequence, conditional_odds, log_posterior_unnorm
from motifgibbs.rng import stream
from motifgibbs.spectral import (
    EXACT_CONDUCTANCE_LIMIT,
    build_full_chain,
    conductance,
    exact_tv_mixing_time,
    lazy_power_gap_check,
    mixing_time_bounds,
    path_bound_rho,
    product_chain,
    random_reversible_chain,
    spectral_gap,
)


def report(k, ok, detail):
    line = f"ACCEPTANCE {k} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def oracle_instances(n=50, seed=2024):
    """Random M=2 instances with w in {1, 2, 3} and at most 10 blocks."""
    out = []
    for r in range(n):
        g = stream(seed, r)
        w = int(g.integers(1, 4))
        n_blocks = int(g.integers(1, 11))
        S = Sequence(g.integers(1, 3, size=n_blocks * w), w, 2)
        params = ModelParams(float(g.uniform(0.05, 0.6)), g.uniform(0.3, 2.0, size=(w + 1, 2)))
        out.append((S, params))
    return out


INSTANCES = oracle_instances()


def assignments(n):
    codes = np.arange(2**n)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(np.int8)


# ---------------------------------------------------------------------------

def test_1_enumeration_oracles():
    worst = dict(sum=0.0, naive=0.0, class_spread=0.0, odds=0.0, rows=0.0, balance=0.0,
                 aggregate=0.0)
    lazy = True
    for S, params in INSTANCES:
        n = S.n_blocks
        As = assignments(n)
        lp = np.array([log_posterior_unnorm(S, A, params) for A in As])
        naive = np.array([naive_log_post(S.symbols.tolist(), S.w, S.M, A.tolist(), params.p0,
                                         params.beta.tolist()) for A in As])
        p = np.exp(lp - lp.max())
        p /= p.sum()
        q = np.exp(naive - naive.max())
        q /= q.sum()
        worst["sum"] = max(worst["sum"], abs(p.sum() - 1))
        worst["naive"] = max(worst["naive"], np.max(np.abs(p - q)))
        # (b) constant on word-count classes
        chain = collapsed_posterior(S, params)
        labels = np.array([chain.space.index(collapse(S, A).counts) for A in As])
        for c in np.unique(labels):
            vals = lp[labels == c]
            worst["class_spread"] = max(worst["class_spread"], np.ptp(vals))
        # (c) conditional odds
        for A in As[:: max(1, len(As) // 16)]:
            for i in range(n):
                A1, A0 = A.copy(), A.copy()
                A1[i], A0[i] = 1, 0
                ratio = math.exp(lp[state_code(A1)] - lp[state_code(A0)])
                rel = abs(conditional_odds(S, A, i, params) / ratio - 1)
                worst["odds"] = max(worst["odds"], rel)
        # (d) full kernel
        full = build_full_chain(S, params)
        P = full.dense()
        worst["rows"] = max(worst["rows"], np.max(np.abs(P.sum(axis=1) - 1)))
        lazy &= bool(P.diagonal().min() >= 0.5 - 1e-10)
        F = full.pi[:, None] * P
        worst["balance"] = max(worst["balance"], np.max(np.abs(F - F.T)))
        # (e) closed-form projection against brute-force aggregation
        proj = projection_matrix(S, params)
        Z = np.eye(proj.n_states)[labels]
        agg = (Z.T @ F @ Z) / (Z.T @ full.pi)[:, None]
        worst["aggregate"] = max(worst["aggregate"],
                                 np.max(np.abs(agg - proj.transitions.toarray())))
    ok = lazy and all(v <= 1e-10 for v in worst.values())
    detail = ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
    report(1, ok, f"{len(INSTANCES)} instances; lazy={lazy}; worst {detail}")
    assert ok


def test_2_bound_sandwich():
    tol = 1e-8
    failures = []
    n_exact = 0
    for idx, (S, params) in enumerate(INSTANCES):
        full = build_full_chain(S, params)
        proj = projection_matrix(S, params).to_reversible_chain()
        gap_t = spectral_gap(full)
        gap_p = spectral_gap(proj)
        checks = {"gapT<=gapTbar": gap_t <= gap_p + tol}
        if proj.n > 1:
            cond = conductance(proj, check=False)
            n_exact += cond.mode == "exact"
            checks["gapTbar<=2phi"] = gap_p <= 2 * cond.phi + tol
            checks["gapTbar>=1/rho"] = gap_p >= path_bound_rho(proj, check=False).gap_lower - tol
        tau = exact_tv_mixing_time(full, 0.25)
        lo, hi = mixing_time_bounds(gap_t, float(full.log_pi.min()), 0.25)
        checks["tau in bounds"] = lo - tol <= tau <= hi + tol
        failures += [(idx, name) for name, good in checks.items() if not good]
    ok = not failures
    report(2, ok, f"{len(INSTANCES)} instances, conductance exact on {n_exact} "
                  f"(sweep cut above {EXACT_CONDUCTANCE_LIMIT} states); failures={failures}")
    assert ok


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="log d grows with n_blocks at these sizes; see notes")
def test_3_slow_mixing_trend():
    gen = deterministic_model([[1, 1], [2, 2]], [0.05, 0.05], [0.5, 0.5])
    params = ModelParams(0.1, np.ones((3, 2)))
    sizes = [40, 80, 160, 320]
    means = []
    for n in sizes:
        vals = []
        for d in range(5):
            S, _ = sample_sequence(gen, n, rng=stream(3, n, d))
            vals.append(bottleneck_d(collapsed_posterior(S, params)).log_d)
        means.append(float(np.mean(vals)))
    x = np.array(sizes, dtype=float)
    y = np.array(means)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    r2 = 1 - resid @ resid / np.sum((y - y.mean()) ** 2)
    ok = slope < 0 and r2 >= 0.9
    report(3, ok, f"mean log d at n={sizes}: {np.round(means, 3).tolist()}; "
                  f"slope={slope:.4g}, R^2={r2:.3f} (need slope<0, R^2>=0.9)")
    assert ok


def test_4_rapid_mixing_contrast():
    Ls = [4, 6, 8, 10, 12]
    params = ModelParams.uniform(1, 2, 0.1)
    worst = []
    for L in Ls:
        gaps = [spectral_gap(build_full_chain(Sequence(stream(4, L, r).integers(1, 3, size=L), 1, 2),
                                              params))
                for r in range(20)]
        worst.append(min(gaps))
    y = np.log(1 / np.array(worst))
    L = np.array(Ls, dtype=float)
    poly, poly_res = np.polyfit(np.log(L), y, 1, full=True)[:2]
    expo, expo_res = np.polyfit(L, y, 1, full=True)[:2]
    ok = poly[0] <= 14 and poly_res[0] < expo_res[0]
    report(4, ok, f"worst gaps {np.round(worst, 5).tolist()}; log-log slope={poly[0]:.3f}; "
                  f"residuals poly={poly_res[0]:.2e} < exp={expo_res[0]:.2e}")
    assert ok


@pytest.mark.slow
def test_5_table1_mini_reproduction():
    t0 = time.time()
    a = run_table1_cell(1, 6, 2000, p=0.005, n_datasets=10, seed=0)
    b = run_table1_cell(2, 10, 3000, p=0.005, n_datasets=10, seed=0)
    cells = smoke_cells([{"J": 1, "w": 6, "n_blocks": 2000}, {"J": 2, "w": 10, "n_blocks": 3000}],
                        0.005)
    smoke = [run_table1_cell(c["J"], c["w"], c["n_blocks"], p=c["p"], n_datasets=SMOKE_DATASETS,
                             seed=0) for c in cells]
    fa, fb = a.flagged_percentage, b.flagged_percentage
    sa, sb = smoke[0].flagged_percentage, smoke[1].flagged_percentage
    ok = fa == 0 and fb >= 40 and sb > sa
    report(5, ok, f"(a) {fa:.0f}% flagged, (b) {fb:.0f}% flagged; smoke (a) {sa:.0f}% "
                  f"< (b) {sb:.0f}%; {time.time() - t0:.0f}s")
    assert ok


def test_6_calibration():
    results = {}
    for target in (0.95, 0.30):
        a = calibrate_dirichlet_concentration(target, 4, mc_samples=100_000, seed=0)
        results[target] = (a, median_max_dirichlet(a, 4, 100_000, seed=12345))
    ok = all(abs(check - t) <= 0.01 for t, (_, check) in results.items())
    assert study_concentrations(4) == (results[0.30][0], results[0.95][0])
    report(6, ok, "; ".join(f"target {t}: a={a:.4g}, fresh-seed median max {c:.4f}"
                            for t, (a, c) in results.items()))
    assert ok


def test_7_landscape_probe():
    gen = deterministic_model([[1, 4, 2, 2, 3], [4, 2, 4, 1, 3]], [0.005, 0.001], np.full(4, 0.25))
    res = find_local_maxima(gen, resolution=20, p0=0.001, n_random=20, seed=0)
    grid = LandscapeGrid(5, 4, 20)
    dists = []
    for j in range(2):
        target = grid.theta(grid.project(np.vstack([gen.background, gen.motif_matrices[j]])))
        dists.append(min(float(np.max(np.abs(m.theta - target))) for m in res.modes))
    separated = all(c["separated"] for c in res.certificates)
    ok = res.n_modes >= 2 and separated and max(dists) <= 0.1
    report(7, ok, f"{res.n_modes} modes, certificates separated={separated}, "
                  f"sup distance to motif matrices {np.round(dists, 4).tolist()} (p0=0.001)")
    assert ok


def test_8_tool_suite():
    rng = stream(8)
    bad = []
    for t in range(100):
        chain = random_reversible_chain(int(rng.integers(2, 21)), rng=rng)
        gap = spectral_gap(chain)
        if gap > 2 * conductance(chain, mode="exact", check=False).phi + 1e-10:
            bad.append((t, "cheeger"))
        if gap < path_bound_rho(chain, check=False).gap_lower - 1e-10:
            bad.append((t, "paths"))
        for N in (2, 3):
            if not lazy_power_gap_check(chain, N)["holds"]:
                bad.append((t, f"power{N}"))
    prod_err = 0.0
    for t in range(20):
        k = int(rng.integers(2, 4))
        parts = [random_reversible_chain(int(rng.integers(2, 5)), rng=rng) for _ in range(k)]
        b = rng.dirichlet(np.ones(k))
        expected = min(bk * spectral_gap(c) for bk, c in zip(b, parts))
        prod_err = max(prod_err, abs(spectral_gap(product_chain(parts, b)) - expected))
    ok = not bad and prod_err <= 1e-10
    report(8, ok, f"100 chains: violations={bad}; 20 products: max gap error {prod_err:.1e}")
    assert ok
