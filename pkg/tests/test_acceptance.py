"""Acceptance criteria 1-9, each at its stated tolerance.

Every criterion is a function returning ``(passed, detail)``; the pytest
wrappers assert on it and the outcome line is printed in the terminal
summary (see conftest.py). Run ``python tests/test_acceptance.py`` for the
lines alone.
"""
from __future__ import annotations

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import stats

from chisup import asymptotics as A
from chisup import constants as K
from chisup import criteria
from chisup.chi import BVector, chi_values, spherical_sup
from chisup.harness import (ExperimentConfig, borell_bound, double_sup_bound, empirical_tail,
                            ratio_report, sup_statistics)
from chisup.paths import Grid, bridge_model, bridge_paths, fbm_model
from chisup.weights import X_MIN, FbmPlateau, RhoLogLog, classify, corollary34_constants, taylor_fit

WORKERS = os.cpu_count() or 1
RESULTS: dict = {}


def _record(n: int, passed: bool, detail: str):
    RESULTS[n] = (passed, detail)
    return passed, detail


# --- 1 -----------------------------------------------------------------------------

def criterion_1():
    u = np.linspace(0.1, 100.0, 1000)
    err2 = float(np.max(np.abs(A.upsilon(2, u) / stats.chi2.sf(u, 2) - 1.0)))
    ok = err2 <= 1e-12
    parts = [f"k=2 max rel err {err2:.1e}"]
    for k in (1, 3, 4, 5):
        us = np.array([20.0, 40.0, 60.0, 80.0])
        ratio = np.exp(A.chi2_log_survival(k, us) - A.log_upsilon(k, us))
        dev = np.abs(ratio - 1.0)
        ok_k = abs(ratio[-1] - 1.0) <= 0.05 and bool(np.all(np.diff(dev) < 0))
        ok = ok and ok_k
        parts.append(f"k={k} ratio@80={ratio[-1]:.4f}")
    return _record(1, ok, "; ".join(parts))


# --- 2 -----------------------------------------------------------------------------

RHO_LATTICE = [(1.0, 0.0), (2.0, 1.0), (0.5, -0.3),                        # case a
               (0.5, -0.5 * X_MIN), (1.0, -X_MIN), (2.0, -2.0 * X_MIN),     # case b
               (1.0, -1.5), (2.0, -4.0), (1.0, -2.5)]                       # case c
PLATEAU_LATTICE = [(1.0, 0.1, 0.5, None), (2.0, 0.3, 0.5, None), (0.5, 0.05, 0.5, None),
                   (1.0, 0.1, 0.3, 0.8), (1.5, 0.2, 0.7, 0.7)]
B_VECTORS = [BVector((1.0,)), BVector((1.0, 1.0, 0.6))]


def criterion_2():
    worst = 0.0
    n = 0
    us = np.array([10.0, 40.0, 100.0])
    for b in B_VECTORS:
        for r1, r2 in RHO_LATTICE:
            w = RhoLogLog(r1, r2)
            chain = np.log(A.tail_f1(bridge_model(), classify(w), b, us))
            closed = A.corollary34_log_tail(r1, r2, b, us)
            worst = max(worst, float(np.max(np.abs(np.expm1(chain - closed)))))
            n += 1
        for rho, eps, H, h in PLATEAU_LATTICE:
            w = FbmPlateau(rho, eps)
            chain = np.log(A.tail_f2(fbm_model(H), classify(w), b, us, pickands=h))
            closed = A.corollary35_log_tail(rho, eps, H, b, us, pickands=h)
            worst = max(worst, float(np.max(np.abs(np.expm1(chain - closed)))))
            n += 1
    return _record(2, worst <= 1e-9 and n >= 12, f"{n} parameter points x 3 levels, max rel diff {worst:.1e}")


# --- 3 -----------------------------------------------------------------------------

def criterion_3():
    t0 = time.perf_counter()
    e1 = K.pickands(1.0, S=128.0, step=1.0 / 64.0, n=10_000, seed=7, workers=WORKERS)
    t1 = time.perf_counter() - t0
    t0 = time.perf_counter()
    e2 = K.pickands(2.0, S=128.0, step=1.0 / 64.0, n=10_000, seed=7, workers=WORKERS)
    t2 = time.perf_counter() - t0
    ref2 = K.pickands_alpha2_quadrature(128.0)
    ok1 = abs(e1.value - 1.0) <= 0.1 and t1 < 120
    ok2 = abs(e2.value / ref2 - 1.0) <= 0.1 and t2 < 120
    return _record(3, ok1 and ok2,
                   f"H_1 {e1.value:.5f}+-{e1.std_error:.5f} ({t1:.1f}s); "
                   f"H_2 {e2.value:.6f} vs {ref2:.6f} ({t2:.1f}s)")


# --- 4 -----------------------------------------------------------------------------

J_WEIGHTS = [(0.5, 0.0), (1.0, -2.0), (0.1, 0.2), (3.0, -8.0), (2.0, 5.0), (0.3, -0.5)]


def criterion_4():
    t0 = time.perf_counter()
    bm = bridge_model()
    bad = []
    n = 0
    for k in (1, 2, 3):
        for r1, r2 in [(1.25, 0.0), (0.75, 0.0), (1.0, 1 + k / 2 + 0.5), (1.0, 1 + k / 2 - 0.5)]:
            expected = "finite" if (r1 > 1 or (r1 == 1 and r2 > 1 + k / 2)) else "divergent"
            got = criteria.eval_I(bm, RhoLogLog(r1, r2), 1, k).classification
            n += 1
            if got != expected:
                bad.append((k, r1, r2, got))
    for r1, r2 in J_WEIGHTS:
        for S in (0, 1):
            fr = criteria.finiteness_verdict(bm, RhoLogLog(r1, r2), S)
            if fr.verdict != "as_finite":
                bad.append(("J", r1, r2, S, fr.verdict))
    dt = time.perf_counter() - t0
    ok = not bad and dt < 60
    return _record(4, ok, f"{n} I-configurations, {2 * len(J_WEIGHTS)} J searches, "
                          f"mismatches {bad or 'none'} ({dt:.1f}s)")


# --- 5 -----------------------------------------------------------------------------

def criterion_5():
    rng = np.random.default_rng(5)
    grid = Grid.uniform(0.05, 0.95, 64)
    worst = 0.0
    for b in (BVector((1.0, 0.7)), BVector((1.0, 0.8, 0.5))):
        for _ in range(100):
            x = bridge_paths(grid, rng, b.n, normalized=True)
            j = int(rng.integers(grid.n_points))
            exact = math.sqrt(chi_values(x[:, j:j + 1], b)[0])
            worst = max(worst, abs(spherical_sup(list(x), b, j, resolution=1000) - exact))
    return _record(5, worst <= 1e-3, f"200 paths, n in {{2,3}}, max |diff| {worst:.1e}")


# --- 6 -----------------------------------------------------------------------------

def criterion_6():
    worst = 0.0
    for r1, r2 in RHO_LATTICE:
        d = corollary34_constants(r1, r2)
        for t in d.t_points:
            a, beta = taylor_fit(RhoLogLog(r1, r2), t)
            worst = max(worst, abs(a / d.taylor_coeff - 1.0), abs(beta / d.beta - 1.0))
    return _record(6, worst <= 0.01, f"9 sets (3 per case), max rel err {worst:.1e}")


# --- 7 -----------------------------------------------------------------------------

def criterion_7():
    cfg = ExperimentConfig(fbm_model(0.5), FbmPlateau(1.0, 0.1), BVector((1.0,)),
                           [5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0],
                           n_paths=1_000_000, n_points=2 ** 14, master_seed=0, workers=WORKERS)
    t0 = time.perf_counter()
    rep = empirical_tail(cfg)
    dt = time.perf_counter() - t0
    rep.rows = [r for r in rep.rows if 1e-3 <= r.p_hat <= 1e-1]
    summ = ratio_report(rep)
    ok = summ.within and summ.nonincreasing
    table = ", ".join(f"u={u:g}:{r:.3f}" for u, r in zip(summ.u, summ.ratios))
    return _record(7, ok, f"ratios {table}; in band {summ.within}, "
                          f"|ratio-1| nonincreasing {summ.nonincreasing} ({dt:.0f}s)")


# --- 8 -----------------------------------------------------------------------------

U_BOUNDS = (2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0)


def bound_configs():
    common = dict(n_paths=100_000, n_points=2 ** 10, master_seed=8, workers=WORKERS)
    return {
        "bridge, w=1, n=1": ExperimentConfig(bridge_model(), None, BVector((1.0,)), U_BOUNDS, **common),
        "bridge, rho-loglog(1.5,0), b=(1,0.6)": ExperimentConfig(
            bridge_model(), RhoLogLog(1.5, 0.0), BVector((1.0, 0.6)), U_BOUNDS, **common),
        "bridge, rho-loglog(1,-1.5), b=(1,1)": ExperimentConfig(
            bridge_model(), RhoLogLog(1.0, -1.5), BVector((1.0, 1.0)), U_BOUNDS, **common),
        "fbm(0.5), plateau(1,0.1), n=1": ExperimentConfig(
            fbm_model(0.5), FbmPlateau(1.0, 0.1), BVector((1.0,)), U_BOUNDS, **common),
        "fbm(0.3), w=1, b=(1,0.5)": ExperimentConfig(
            fbm_model(0.3), None, BVector((1.0, 0.5)), U_BOUNDS,
            **{**common, "n_paths": 20_000}),
    }


def criterion_8():
    t0 = time.perf_counter()
    failures = []
    n_checked = n_untestable = 0
    for name, cfg in bound_configs().items():
        stat = sup_statistics(cfg)[:, 0]
        bor = borell_bound(cfg, stat=stat)
        dbl = double_sup_bound(cfg)
        for rep in (bor, dbl):
            for r in rep.rows:
                n_checked += r.testable
                n_untestable += r.applicable and not r.testable
                if not r.holds:
                    failures.append((name, rep.kind, r.u))
            if rep.kind == "double-sup":
                for r, (m1, m2) in zip(rep.rows, rep.extra["marginal_counts"]):
                    if r.count > min(m1, m2):
                        failures.append((name, "inclusion", r.u))
    dt = time.perf_counter() - t0
    return _record(8, not failures, f"{n_checked} testable (config, bound, u) checks "
                                    f"({n_untestable} below the n-path resolution), "
                                    f"violations {failures or 'none'} ({dt:.0f}s)")


# --- 9 -----------------------------------------------------------------------------

def _cli(args, out):
    subprocess.run([sys.executable, "-m", "chisup", *args, "--out", out], check=True)
    with open(out, "rb") as fh:
        return fh.read()


def criterion_9(tmpdir: str):
    runs = [
        ["constants", "--alpha", "1", "--n", "2000", "--seed", "7"],
        ["simulate", "--model", "fbm", "--weight", "fbm-plateau", "--u", "5", "7", "--n-paths", "4000",
         "--seed", "3"],
        ["criteria", "--rho1", "1.5", "--rho2", "0", "--k", "1"],
        ["asymptotics", "--corollary", "3.4", "--rho1", "1", "--rho2", "-1.5", "--u", "20", "50"],
        ["verify", "--weight", "one", "--u", "4", "8", "--n-paths", "4000", "--seed", "3"],
    ]
    same = True
    for i, args in enumerate(runs):
        a = _cli(args, os.path.join(tmpdir, f"r{i}a.csv"))
        b = _cli(args, os.path.join(tmpdir, f"r{i}b.csv"))
        c = _cli([args[0], "--config", os.path.join(tmpdir, f"r{i}a.csv")], os.path.join(tmpdir, f"r{i}c.csv"))
        same = same and a == b == c
    cfg = dict(n_paths=5000, n_points=256, master_seed=11, block_size=512)
    base = ExperimentConfig(bridge_model(), RhoLogLog(1.5, 0.0), BVector((1.0, 0.5)), (4.0, 8.0), workers=1, **cfg)
    s1 = sup_statistics(base)
    s3 = sup_statistics(ExperimentConfig(bridge_model(), RhoLogLog(1.5, 0.0), BVector((1.0, 0.5)), (4.0, 8.0),
                                         workers=3, **cfg))
    inv = bool(np.array_equal(s1, s3))
    return _record(9, same and inv, f"{len(runs)} CLI runs byte-identical (repeat and config round-trip) {same}; "
                                    f"statistics identical for 1 vs 3 workers {inv}")


# --- pytest wrappers ------------------------------------------------------------------

def test_criterion_1_upsilon():
    ok, detail = criterion_1()
    assert ok, detail


def test_criterion_2_corollary_closure():
    ok, detail = criterion_2()
    assert ok, detail


def test_criterion_3_pickands():
    ok, detail = criterion_3()
    assert ok, detail


def test_criterion_4_criteria_rho_rule():
    ok, detail = criterion_4()
    assert ok, detail


def test_criterion_5_spherical_identity():
    ok, detail = criterion_5()
    assert ok, detail


def test_criterion_6_taylor_coefficients():
    ok, detail = criterion_6()
    assert ok, detail


@pytest.mark.slow
def test_criterion_7_desk_scale_tail():
    ok, detail = criterion_7()
    assert ok, detail


@pytest.mark.slow
def test_criterion_8_bounds():
    ok, detail = criterion_8()
    assert ok, detail


def test_criterion_9_reproducibility(tmp_path):
    ok, detail = criterion_9(str(tmp_path))
    assert ok, detail


def acceptance_lines() -> list[str]:
    return [f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}" for n, (ok, detail) in sorted(RESULTS.items())]


if __name__ == "__main__":
    import tempfile
    with tempfile.TemporaryDirectory() as d:
        for fn in (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
                   criterion_7, criterion_8):
            ok, detail = fn()
            print(f"criterion {fn.__name__[-1]}: {'PASS' if ok else 'FAIL'} | {detail}", flush=True)
        ok, detail = criterion_9(d)
        print(f"criterion 9: {'PASS' if ok else 'FAIL'} | {detail}", flush=True)
