"""Exit criteria, each at its stated tolerance; one PASS/FAIL line per criterion."""
import time

import numpy as np
import pytest

from sqroute.bounds import factor_ratio, theorem3_expansion, verify_wstar
from sqroute.config import apply_overrides, from_dict
from sqroute.engine import RunConfig, run_region
from sqroute.experiments import exp_merge, exp_popt, exp_tightness, run_experiment, worstcase_instance
from sqroute.model import make_instance
from sqroute.recursion import (build_matrices, eigenvalues_of_A, system_y_limit, theorem2_bound,
                               verify_domination, y_below_z)
from sqroute.tsp import estimate_beta

from .conftest import ACCEPTANCE_LINES, instances

pytestmark = pytest.mark.acceptance


def report(label: str, ok: bool, detail: str, t0: float, budget: float):
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < budget
    line = f"criterion {label} {'PASS' if ok else 'FAIL'}: {detail} ({elapsed:.1f}s, budget {budget:.0f}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_beta():
    t0 = time.perf_counter()
    beta = estimate_beta(1000, 20, np.random.default_rng(1))
    report("1", 0.70 <= beta <= 0.78, f"beta(N=1000, 20 trials) = {beta:.4f} in [0.70, 0.78]", t0, 120)


def test_criterion_2_wstar_certificate():
    t0 = time.perf_counter()
    batch = instances(2, 100, [2, 3, 4, 5, 6], [0.5, 0.8, 0.9, 0.95])
    bad = sum(not verify_wstar(inst) for inst in batch)
    report("2", bad == 0, f"W* certified on {100 - bad}/100 instances, m in 2..6", t0, 60)


def test_criterion_3_theorem2():
    t0 = time.perf_counter()
    batch = instances(3, 50, [1, 2, 3, 4, 5, 6], [0.8, 0.9, 0.95])
    worst = 0.0
    for inst in batch:
        p = inst.weights
        mats = build_matrices(inst, p)
        want = theorem2_bound(inst, p)
        y, it = system_y_limit(mats, np.ones(inst.m), rtol=1e-12, max_iter=10 ** 6)
        assert it < 10 ** 6, "System-Y did not converge"
        worst = max(worst, float(np.max(np.abs(y - want) / want)))
    report("3", worst <= 1e-6, f"max relative gap System-Y limit vs closed form = {worst:.2e} (<= 1e-6)",
           t0, 60)


def test_criterion_4_eigenvalues():
    t0 = time.perf_counter()
    gen = np.random.default_rng(4)
    radius, failures = 0.0, 0
    for k in range(1000):
        (inst,) = instances(int(gen.integers(2 ** 32)), 1, [1 + k % 8], [float(gen.uniform(0.05, 0.99))])
        p = gen.dirichlet(np.ones(inst.m))
        try:
            ev = eigenvalues_of_A(build_matrices(inst, p), imag_tol=1e-9, agree_tol=1e-9)
        except ArithmeticError:
            failures += 1
            continue
        radius = max(radius, float(np.max(np.abs(ev))))
    ok = failures == 0 and radius < 1
    report("4", ok, f"1000 instances: {failures} complex/disagreeing spectra, max |mu| = {radius:.6f}",
           t0, 60)


def test_criterion_5_domination():
    t0 = time.perf_counter()
    chain = all(y_below_z(build_matrices(inst, inst.weights), theorem2_bound(inst, inst.weights), 10 ** 4)
                for inst in instances(5, 20, [1, 2, 3, 4, 5, 6], [0.8, 0.9, 0.95]))
    inst = make_instance([1.0, 2.0], [0.3, 0.3], [0.7, 0.3])  # m = 2, rho = 0.9
    res = verify_domination(inst, inst.weights, 2000, epochs=[1000, 2000], seeds=20)
    slack = np.max((res.simulated_mean - res.y) / res.simulated_se)
    report("5", chain and res.holds,
           f"y <= z for 1e4 steps on 20 instances: {chain}; simulated mean <= y + 2 SE at epochs "
           f"1000/2000: {res.holds} (max (mean - y)/SE = {slack:.2f})", t0, 600)


def test_criterion_6a_factor():
    t0 = time.perf_counter()
    worst = 0.0
    for m in range(1, 9):
        for inst in instances(60 + m, 1000, [m], [0.5, 0.9, 0.99]):
            worst = max(worst, factor_ratio(inst) / (2 * m * m))
    report("6a", worst <= 1 + 1e-12, f"max factor_ratio / 2m^2 over 8000 instances = {worst:.4f}", t0, 60)


@pytest.mark.xfail(strict=True, reason="exact a=2 ratio is 2m^3/(3m-4+2^(2-m)); the 2m^2 expansion "
                                       "holds only as a grows (see the decisions ledger)")
def test_criterion_6b_worstcase_expansion():
    t0 = time.perf_counter()
    gaps = []
    for m in range(2, 7):
        up, lo = theorem3_expansion(m, 2.0)
        gaps.append(abs(factor_ratio(worstcase_instance(m, a=2.0)) / (up / lo) - 1))
    report("6b", max(gaps) <= 0.10,
           "a=2 ratio vs expansion, relative gaps m=2..6: " + ", ".join(f"{g:.3f}" for g in gaps), t0, 60)


def test_criterion_7_tightness():
    t0 = time.perf_counter()
    cfg = from_dict({"schema_version": 1, "experiment": "tightness", "runs": 20, "iterations": 2000,
                     "window": 500, "params": {"m": 4, "n": 1, "rhos": [0.75, 0.9]}})
    table, _ = exp_tightness(cfg)
    chi = dict(zip(table.column("rho"), table.column("mean_chi")))
    ok = 0.55 <= chi[0.75] <= 1.05 and 0.45 <= chi[0.9] <= 1.0
    report("7", ok, f"mean chi {chi[0.75]:.3f} at rho=0.75 (band [0.55, 1.05]), "
                    f"{chi[0.9]:.3f} at rho=0.9 (band [0.45, 1.0])", t0, 900)


def test_criterion_8_popt():
    t0 = time.perf_counter()
    cfg = from_dict({"schema_version": 1, "experiment": "popt", "runs": 200})
    table, _ = exp_popt(cfg)
    hi = max(table.column("max_ratio"))
    spread = max(table.column("max_spread_pct"))
    report("8", hi <= 2.2 and spread <= 0.5,
           f"m=3..8, 200 runs: max upbd_c/upbd_opt = {hi:.4f} (<= 2.2), max spread = {spread:.2e}% (<= 0.5%)",
           t0, 300)


def test_criterion_9_merge_trend():
    t0 = time.perf_counter()
    cfg = from_dict({"schema_version": 1, "experiment": "merge", "runs": 10, "iterations": 1000,
                     "window": 250})
    table, trend = exp_merge(cfg)
    rho_s = dict(trend.rows)["spearman_ratio_vs_lambda2"]
    ratios = ", ".join(f"{x:.3f}" for x in table.column("mean_ratio"))
    report("9", rho_s > 0.9, f"Spearman {rho_s:.3f} (> 0.9) over lambda2 sweep; ratios {ratios}", t0, 900)


def test_criterion_10_engine(tmp_path):
    t0 = time.perf_counter()
    worst = 0.0
    for rho in (0.5, 0.75, 0.9):
        inst = make_instance([1.0, 2.0], [rho / 3, rho / 3], [0.7, 0.3])
        st = run_region(inst, 0, RunConfig(4000, 1000, seed=10))
        lw = inst.rates * st.mean_wait
        worst = max(worst, float(np.max(np.abs(st.mean_queue_time - lw) / lw)))
    cfg = from_dict({"schema_version": 1, "experiment": "tightness", "params": {"m": 2, "rhos": [0.8]}})
    cfg = apply_overrides(cfg, runs=2, iterations=300, seed=42)
    outs = []
    for d in ("a", "b"):
        _, paths = run_experiment(apply_overrides(cfg, out_dir=tmp_path / d))
        outs.append({p.name: p.read_bytes() for p in paths if p.suffix == ".csv"})
    same = outs[0] == outs[1] and len(outs[0]) > 0
    report("10", worst <= 0.15 and same,
           f"Little's law max relative gap {worst:.3f} (<= 0.15, m=2, rho <= 0.9); "
           f"byte-identical CSV on rerun: {same}", t0, 300)
