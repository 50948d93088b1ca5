"""Choosing the SQ selection probabilities p by minimizing the SQ upper bound.

Only the p-dependent factor g(p) = (sum c/p) * (sum sqrt(lambda p))^2 is
optimized; the bound itself is B * g(p).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .bounds import heavy_load_scale
from .model import ProblemInstance

DELTA = 1e-6
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OptResult:
    p_opt: np.ndarray
    upbd_opt: float
    upbd_c: float
    ratio: float  # upbd_c / upbd_opt
    starts_spread: float = 0.0
    local_optima: tuple[float, ...] = ()


def bound_factor(lam, c, p) -> float:
    """g(p) = (sum_a c_a / p_a) * (sum_j sqrt(lambda_j p_j))^2."""
    lam, c, p = (np.asarray(x, dtype=np.float64) for x in (lam, c, p))
    s = float(np.sum(np.sqrt(lam * p)))
    return float(np.sum(c / p)) * s * s


def golden_section(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on [lo, hi]; returns (x, f(x)) with x the best point seen."""
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def optimize_p_two_class(instance: ProblemInstance, c=None, delta: float = DELTA,
                         tol: float = 1e-10) -> OptResult:
    if instance.m != 2:
        raise ValueError("two-class optimizer needs m = 2")
    c = instance.weights if c is None else np.asarray(c, dtype=np.float64)
    l1, l2 = (float(x) for x in instance.rates)
    c1, c2 = float(c[0]), float(c[1])

    def g(x):
        s = math.sqrt(l1 * x) + math.sqrt(l2 * (1.0 - x))
        return (c1 / x + c2 / (1.0 - x)) * s * s

    x, gx = golden_section(g, delta, 1.0 - delta, tol)
    # symmetric instances: the interior bracket can miss the midpoint by ~tol
    if g(0.5) <= gx:
        x, gx = 0.5, g(0.5)
    B = heavy_load_scale(instance)
    upbd_c = B * bound_factor(instance.rates, c, c)
    upbd_opt = B * gx
    return OptResult(np.array([x, 1.0 - x]), upbd_opt, upbd_c, upbd_c / upbd_opt, 0.0, (upbd_opt,))


def _pairwise_descent(lam: list[float], c: list[float], p: list[float], delta: float,
                      rel_tol: float, max_sweeps: int) -> tuple[list[float], float]:
    """Cyclic golden-section line searches moving mass between coordinate pairs."""
    m = len(p)
    sq = [math.sqrt(lam[k] * p[k]) for k in range(m)]
    inv = [c[k] / p[k] for k in range(m)]
    s1, s2 = sum(inv), sum(sq)
    val = s1 * s2 * s2
    pairs = list(itertools.combinations(range(m), 2))
    for _ in range(max_sweeps):
        start = val
        for i, j in pairs:
            tot = p[i] + p[j]
            if tot <= 2 * delta:
                continue
            r1 = s1 - inv[i] - inv[j]
            r2 = s2 - sq[i] - sq[j]
            li, lj, ci, cj = lam[i], lam[j], c[i], c[j]

            def g(x):
                s = r2 + math.sqrt(li * x) + math.sqrt(lj * (tot - x))
                return (r1 + ci / x + cj / (tot - x)) * s * s

            x, gx = golden_section(g, delta, tot - delta, 1e-9 * tot)
            if gx < val:
                p[i], p[j] = x, tot - x
                sq[i], sq[j] = math.sqrt(li * x), math.sqrt(lj * (tot - x))
                inv[i], inv[j] = ci / x, cj / (tot - x)
                s1, s2 = sum(inv), sum(sq)
                val = s1 * s2 * s2
        if start - val < rel_tol * start:
            break
    return p, val


def random_simplex_point(m: int, gen: np.random.Generator, delta: float = DELTA) -> np.ndarray:
    p = gen.dirichlet(np.ones(m))
    p = np.maximum(p, 10 * delta)
    return p / p.sum()


def optimize_p_multistart(instance: ProblemInstance, c=None, starts: int = 5,
                          gen: np.random.Generator | None = None, delta: float = DELTA,
                          rel_tol: float = 1e-9, max_sweeps: int = 10 ** 4) -> OptResult:
    """Best of ``starts`` local optima from random points of the simplex.

    The winner is the lowest bound, ties going to the earlier start.
    ``starts_spread`` is (max - min) / min over the local optima.
    """
    if instance.m < 2:
        raise ValueError("multistart optimizer needs m >= 2")
    if starts < 1:
        raise ValueError("need at least one start")
    gen = gen if gen is not None else np.random.default_rng(0)
    c = instance.weights if c is None else np.asarray(c, dtype=np.float64)
    lam = [float(x) for x in instance.rates]
    cl = [float(x) for x in c]
    best_p, best_v, values = None, math.inf, []
    for _ in range(starts):
        p0 = [float(x) for x in random_simplex_point(instance.m, gen, delta)]
        p, v = _pairwise_descent(lam, cl, p0, delta, rel_tol, max_sweeps)
        values.append(v)
        if v < best_v:
            best_p, best_v = p, v
    B = heavy_load_scale(instance)
    upbd_c = B * bound_factor(lam, cl, cl)
    upbd_opt = B * best_v
    spread = (max(values) - min(values)) / min(values)
    p_opt = np.array(best_p)
    p_opt /= p_opt.sum()
    return OptResult(p_opt, upbd_opt, upbd_c, upbd_c / upbd_opt, spread,
                     tuple(B * v for v in values))
