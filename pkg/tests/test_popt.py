import numpy as np
import pytest

from sqroute.bounds import sq_upper_bound
from sqroute.model import make_instance
from sqroute.popt import (bound_factor, golden_section, optimize_p_multistart, optimize_p_two_class,
                          random_simplex_point)

from .conftest import instances


def test_golden_section_quadratic():
    x, fx = golden_section(lambda t: (t - 0.3) ** 2, 0.0, 1.0, 1e-10)
    assert x == pytest.approx(0.3, abs=1e-9) and fx < 1e-18


def test_two_class_symmetric():
    inst = make_instance([1.0, 1.0], [0.3, 0.3], [0.5, 0.5])
    res = optimize_p_two_class(inst)
    # a flat minimum: x is only located to ~sqrt(machine eps)
    assert res.p_opt == pytest.approx([0.5, 0.5], abs=1e-7)
    assert res.ratio == pytest.approx(1.0, abs=1e-12)


def test_two_class_skewed_ratio():
    inst = make_instance([1.0, 1.0], [0.3, 0.3], [0.9, 0.1])
    res = optimize_p_two_class(inst)
    assert res.upbd_c >= res.upbd_opt and res.ratio >= 1
    assert res.upbd_opt == pytest.approx(sq_upper_bound(inst, p=res.p_opt))


def test_two_class_grid_oracle():
    for inst in instances(1, 5, [2], [0.9]):
        res = optimize_p_two_class(inst)
        grid = np.arange(1, 10 ** 4) / 10 ** 4
        vals = [sq_upper_bound(inst, p=[g, 1 - g]) for g in grid]
        assert min(vals) >= res.upbd_opt * (1 - 1e-8)


def test_two_class_needs_two():
    with pytest.raises(ValueError):
        optimize_p_two_class(make_instance([1.0], [0.3], [1.0]))


def test_multistart_agrees_with_two_class():
    for inst in instances(2, 10, [2], [0.8]):
        a = optimize_p_two_class(inst)
        b = optimize_p_multistart(inst, gen=np.random.default_rng(0))
        assert b.upbd_opt == pytest.approx(a.upbd_opt, rel=1e-6)


def test_multistart_spread_and_ratio():
    gen = np.random.default_rng(3)
    for inst in instances(3, 30, [3, 4, 5, 6, 7, 8], [0.9]):
        res = optimize_p_multistart(inst, gen=gen)
        assert res.starts_spread <= 0.005
        assert 1 - 1e-9 <= res.ratio <= 2
        assert len(res.local_optima) == 5
        assert np.all(res.p_opt > 0) and res.p_opt.sum() == pytest.approx(1.0)


def test_local_optimality_spot_check():
    gen = np.random.default_rng(4)
    (inst,) = instances(4, 1, [5], [0.9])
    res = optimize_p_multistart(inst, gen=gen)
    for _ in range(100):
        p = gen.dirichlet(np.ones(5))
        assert sq_upper_bound(inst, p=p) >= res.upbd_opt * (1 - 1e-9)


def test_scale_invariance():
    (inst,) = instances(5, 1, [4], [0.9])
    a = optimize_p_multistart(inst, gen=np.random.default_rng(0))
    b = optimize_p_multistart(inst, c=3.0 * inst.weights, gen=np.random.default_rng(0))
    assert b.p_opt == pytest.approx(a.p_opt, abs=1e-4)


def test_relabeling_equivariance():
    (inst,) = instances(6, 1, [4], [0.9])
    perm = [2, 0, 3, 1]
    a = optimize_p_multistart(inst, gen=np.random.default_rng(0))
    shuffled = inst.with_classes([inst.classes[k] for k in perm])
    b = optimize_p_multistart(shuffled, gen=np.random.default_rng(0))
    assert b.p_opt == pytest.approx(a.p_opt[perm], abs=1e-4)
    assert b.upbd_opt == pytest.approx(a.upbd_opt, rel=1e-9)


def test_bound_factor_matches_bound():
    (inst,) = instances(7, 1, [3], [0.5])
    p = np.array([0.2, 0.5, 0.3])
    from sqroute.bounds import heavy_load_scale
    assert heavy_load_scale(inst) * bound_factor(inst.rates, inst.weights, p) == pytest.approx(
        sq_upper_bound(inst, p=p))


def test_random_simplex_point_interior():
    p = random_simplex_point(6, np.random.default_rng(0))
    assert p.sum() == pytest.approx(1.0) and np.all(p > 0)


def test_multistart_deterministic():
    (inst,) = instances(8, 1, [5], [0.9])
    a = optimize_p_multistart(inst, gen=np.random.default_rng(11))
    b = optimize_p_multistart(inst, gen=np.random.default_rng(11))
    assert np.array_equal(a.p_opt, b.p_opt)
