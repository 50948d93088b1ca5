import numpy as np
import pytest

from sqroute import _fallback as py
from sqroute.tsp import NEIGHBOR_K, _neighbor_lists

cy = pytest.importorskip("sqroute._kernels")


def cloud(seed, n):
    g = np.random.default_rng(seed)
    return np.ascontiguousarray(g.random(n)), np.ascontiguousarray(g.random(n))


@pytest.mark.parametrize("n", [0, 1, 2, 5, 40, 300])
def test_tour_length_parity(n):
    xs, ys = cloud(n, n)
    order = np.random.default_rng(1).permutation(n).astype(np.int64)
    assert cy.tour_length(xs, ys, order) == pytest.approx(py.tour_length(xs, ys, order), rel=1e-12, abs=0)


@pytest.mark.parametrize("n", [1, 3, 50, 400])
def test_nearest_neighbor_parity(n):
    xs, ys = cloud(10 + n, n)
    a = np.asarray(cy.nearest_neighbor_order(xs, ys, 0.0, 0.0))
    b = py.nearest_neighbor_order(xs, ys, 0.0, 0.0)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("n", [4, 9, 60])
def test_two_opt_scan_parity(n):
    xs, ys = cloud(20 + n, n)
    start = py.nearest_neighbor_order(xs, ys, 0.0, 0.0)
    a, b = start.copy(), start.copy()
    pa = cy.two_opt_scan(xs, ys, a, 30)
    pb = py.two_opt_scan(xs, ys, b, 30)
    assert pa == pb
    assert np.array_equal(a, b)


@pytest.mark.parametrize("or_opt", [False, True])
def test_two_opt_neighbors_parity(or_opt):
    xs, ys = cloud(7, 500)
    nbr = _neighbor_lists(np.column_stack([xs, ys]), NEIGHBOR_K)
    start = py.nearest_neighbor_order(xs, ys, 0.0, 0.0)
    a, b = start.copy(), start.copy()
    ma = cy.two_opt_neighbors(xs, ys, a, nbr, 30 * 500, or_opt)
    mb = py.two_opt_neighbors(xs, ys, b, nbr, 30 * 500, or_opt)
    assert ma == mb
    assert np.array_equal(a, b)
    assert sorted(a) == list(range(500))


def test_iterate_y_parity():
    g = np.random.default_rng(3)
    A = np.ascontiguousarray(np.diag([0.5, 0.6, 0.7]) + 0.02 * g.random((3, 3)))
    B = np.ascontiguousarray(0.3 * g.random((3, 3)))
    y0 = np.array([1.0, 5.0, 20.0])
    ya, ia = cy.iterate_y(A, B, y0, 100000, 1e-12)
    yb, ib = py.iterate_y(A, B, y0, 100000, 1e-12)
    assert ia == ib
    assert np.asarray(ya) == pytest.approx(yb, rel=1e-12)


def test_iterate_y_zero_stays_zero():
    A = np.eye(2) * 0.5
    B = np.ones((2, 2))
    for k in (cy, py):
        y, it = k.iterate_y(A, B, np.zeros(2), 100, 1e-10)
        assert np.all(np.asarray(y) == 0) and it == 1


def test_env_var_selects_fallback():
    import os
    import subprocess
    import sys

    code = ("import numpy as np, sqroute; from sqroute.tsp import heuristic_tour;"
            "t = heuristic_tour(np.random.default_rng(0).random((30, 2)));"
            "print(sqroute.BACKEND, round(t.length, 9))")
    env = dict(os.environ, SQROUTE_PURE="1")
    pure = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    env["SQROUTE_PURE"] = "0"
    fast = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert pure.stdout.split()[0] == "python" and fast.stdout.split()[0] == "cython"
    assert pure.stdout.split()[1] == fast.stdout.split()[1]
