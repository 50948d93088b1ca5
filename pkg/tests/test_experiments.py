import numpy as np
import pytest

from sqroute.bounds import merge_upper_bound, sq_upper_bound
from sqroute.config import apply_overrides, default_config, from_dict
from sqroute.experiments import (exp_beta, exp_merge, exp_popt, exp_tightness, exp_worstcase, log_slope,
                                 merge_instance, random_instance, render_csv, render_dat, seed_for,
                                 worstcase_instance)
from sqroute.model import load_factor


def small(exp, **params):
    cfg = from_dict({"schema_version": 1, "experiment": exp, "params": params})
    return cfg


def test_random_instance_normalized():
    inst = random_instance(np.random.default_rng(0), 5, 0.85)
    assert load_factor(inst) == pytest.approx(0.85)
    assert inst.weights.sum() == pytest.approx(1.0)
    ratios = inst.weights / inst.rates
    assert np.all(np.diff(ratios) <= 1e-12)


def test_seed_for_distinct_and_stable():
    assert seed_for(1, 2, 3) == seed_for(1, 2, 3)
    assert len({seed_for(0, 1, k) for k in range(100)}) == 100


def test_log_slope_power_law():
    x = np.arange(2, 7)
    assert log_slope(x, 3.0 * x ** 2) == pytest.approx(2.0)


def test_worstcase_instance_shape():
    inst = worstcase_instance(4, a=2.0, rho=0.85)
    assert np.allclose(inst.rates, [1, 2, 4, 8])
    assert np.allclose(inst.rates * inst.weights, inst.rates[0] * inst.weights[0])
    assert load_factor(inst) == pytest.approx(0.85)


def test_merge_bound_ratio_closed_form():
    l2 = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
    r = np.array([merge_upper_bound(merge_instance(x)) / sq_upper_bound(merge_instance(x)) for x in l2])
    assert np.all(np.diff(r) > 0)
    # at p = c the SQ factor is sum(c/p) (sum sqrt(lam c))^2 = 2 (sqrt(c1) + sqrt(lam2 c2))^2
    sq = 2 * (np.sqrt(0.995) + np.sqrt(l2 * 0.005)) ** 2
    assert r == pytest.approx((1.0 + l2) / sq, rel=1e-12)


def test_tightness_small_run():
    cfg = apply_overrides(small("tightness", m=2, rhos=[0.75]), runs=2, iterations=300)
    table, runs = exp_tightness(cfg)
    assert table.columns[:2] == ["rho", "mean_chi"]
    assert len(table.rows) == 1 and len(runs.rows) == 2
    chi = table.rows[0][1]
    assert 0.2 < chi < 2.0


def test_merge_symmetric_ratio_band():
    cfg = apply_overrides(small("merge", lambda2=[1.0], c1=0.5), runs=2, iterations=400)
    table, _ = exp_merge(cfg)
    assert 0.7 <= table.rows[0][1] <= 1.4


def test_popt_two_class_curve():
    cfg = apply_overrides(small("popt", ms=[3], two_class_grid=9), runs=3)
    table, curve = exp_popt(cfg)
    ratios = np.array(curve.column("ratio"))
    c1 = np.array(curve.column("c1"))
    assert np.all(ratios >= 1 - 1e-12)
    assert ratios[np.argmin(abs(c1 - 0.5))] == pytest.approx(1.0, abs=1e-9)
    # symmetric in c1 <-> 1 - c1 because the rates are equal
    assert ratios == pytest.approx(ratios[::-1], rel=1e-6)
    assert table.rows[0][0] == 3 and table.rows[0][4] == 3


def test_beta_table():
    cfg = apply_overrides(small("beta-estimate", sizes=[50]), runs=3)
    (table,) = exp_beta(cfg)
    assert table.rows[0][:2] == [50, 3]


def test_render_csv_and_dat():
    cfg = apply_overrides(small("popt", ms=[3], two_class_grid=3), runs=2)
    table, curve = exp_popt(cfg)
    text = render_csv(cfg, curve)
    assert text.splitlines()[0] == "# table: popt_two_class"
    assert f"# config_hash: {cfg.digest()}" in text
    dat = render_dat(cfg, curve)
    assert dat.splitlines()[-1].count(" ") == 1


@pytest.mark.slow
def test_worstcase_slope():
    cfg = apply_overrides(small("worstcase"), runs=2, iterations=1000)
    table, fit = exp_worstcase(cfg)
    slope = dict(fit.rows)["cost_over_lower"]
    assert 1.2 <= slope <= 2.5
