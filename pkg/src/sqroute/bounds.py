"""Heavy-load lower bounds, the SQ and Merge upper bounds, and their ratio.

All formulas use the published beta_TSP = 0.7120. ``B`` below denotes
beta^2 |E| / (n^2 v^2 (1 - rho)^2), so that Psi = B / 2.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linprog

from .model import ProblemInstance, load_factor
from .tsp import BETA_TSP

#: Travel-distance constant valid at every load, 2 / (3 sqrt(2 pi)).
GAMMA = 2.0 / (3.0 * math.sqrt(2.0 * math.pi))


def _check_stable(instance: ProblemInstance) -> float:
    rho = load_factor(instance)
    if not rho < 1:
        raise ValueError(f"load factor {rho:.6g} >= 1: no stable policy exists")
    return rho


def _check_order(instance: ProblemInstance):
    ratio = instance.weights / instance.rates
    if np.any(ratio[:-1] < ratio[1:] * (1 - 1e-12)):
        raise ValueError("classes must be ordered by nonincreasing c/lambda")


def heavy_load_scale(instance: ProblemInstance) -> float:
    """B = beta^2 |E| / (n^2 v^2 (1 - rho)^2)."""
    rho = _check_stable(instance)
    return BETA_TSP ** 2 * instance.env.area / (instance.n ** 2 * instance.v ** 2 * (1 - rho) ** 2)


def psi(instance: ProblemInstance) -> float:
    return 0.5 * heavy_load_scale(instance)


def wstar(instance: ProblemInstance) -> np.ndarray:
    """Closed-form optimum of the lower-bound LP: Psi (lambda_a + 2 sum_{j<a} lambda_j)."""
    _check_order(instance)
    lam = instance.rates
    before = np.concatenate(([0.0], np.cumsum(lam)[:-1]))
    return psi(instance) * (lam + 2.0 * before)


def _tail_weights(c: np.ndarray) -> np.ndarray:
    # c_a + 2 sum_{j>a} c_j
    after = np.concatenate((np.cumsum(c[::-1])[::-1][1:], [0.0]))
    return c + 2.0 * after


def heavy_load_lower_bound(instance: ProblemInstance, c=None) -> float:
    """Psi * sum_a (c_a + 2 sum_{j>a} c_j) lambda_a; cross-checked against c . W*."""
    c = instance.weights if c is None else np.asarray(c, dtype=np.float64)
    _check_order(instance)
    value = psi(instance) * float(np.dot(_tail_weights(c), instance.rates))
    other = float(np.dot(c, wstar(instance)))
    if not math.isclose(value, other, rel_tol=1e-9, abs_tol=0.0):
        raise ArithmeticError(f"lower bound forms disagree: {value} vs {other}")
    return value


def lp_oracle(instance: ProblemInstance, c=None) -> tuple[float, np.ndarray]:
    """Solve min c.W over the m prefix constraints (and W >= 0) numerically."""
    c = instance.weights if c is None else np.asarray(c, dtype=np.float64)
    lam = instance.rates
    m = len(lam)
    L = np.tril(np.tile(lam, (m, 1)))
    rhs = psi(instance) * np.cumsum(lam) ** 2
    res = linprog(c, A_ub=-L, b_ub=-rhs, bounds=[(0, None)] * m, method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP oracle failed: {res.message}")
    return float(res.fun), res.x


def verify_wstar(instance: ProblemInstance, c=None, w=None, rtol: float = 1e-9) -> bool:
    """Certify a candidate W (default: the closed form) for the lower-bound LP.

    Checks all 2^m - 1 subset constraints, tightness of the m prefix
    constraints, and that an independent LP solve finds nothing cheaper.
    """
    m = instance.m
    if m > 12:
        raise ValueError("subset enumeration limited to m <= 12")
    c = instance.weights if c is None else np.asarray(c, dtype=np.float64)
    w = wstar(instance) if w is None else np.asarray(w, dtype=np.float64)
    lam = instance.rates
    ps = psi(instance)
    lw = lam * w
    for size in range(1, m + 1):
        for subset in itertools.combinations(range(m), size):
            idx = list(subset)
            lhs = lw[idx].sum()
            rhs = ps * lam[idx].sum() ** 2
            if lhs < rhs * (1 - rtol):
                return False
    prefix_lhs = np.cumsum(lw)
    prefix_rhs = ps * np.cumsum(lam) ** 2
    if np.any(np.abs(prefix_lhs - prefix_rhs) > rtol * prefix_rhs):
        return False
    best, _ = lp_oracle(instance, c)
    return float(np.dot(c, w)) <= best * (1 + rtol)


def universal_lower_bound(instance: ProblemInstance, c=None) -> float:
    """Lower bound valid for every load; the correction term is n c_1 / (2 lambda_1)."""
    c = instance.weights if c is None else np.asarray(c, dtype=np.float64)
    rho = _check_stable(instance)
    scale = GAMMA ** 2 * instance.env.area / (instance.n ** 2 * instance.v ** 2 * (1 - rho) ** 2)
    lam = instance.rates
    return float(scale * np.dot(_tail_weights(c), lam)
                 - instance.n * c[0] / (2.0 * lam[0])
                 + np.dot(c, instance.means))


def sq_upper_bound(instance: ProblemInstance, c=None, p=None) -> float:
    """B * sum_a (c_a / p_a) * (sum_j sqrt(lambda_j p_j))^2."""
    c = instance.weights if c is None else np.asarray(c, dtype=np.float64)
    p = c if p is None else np.asarray(p, dtype=np.float64)
    if np.any(p <= 0):
        raise ValueError("every p_a must be positive")
    s = np.sum(np.sqrt(instance.rates * p))
    return heavy_load_scale(instance) * float(np.sum(c / p)) * float(s * s)


def merge_upper_bound(instance: ProblemInstance) -> float:
    """B * Lambda."""
    return heavy_load_scale(instance) * instance.total_rate


def factor_ratio(instance: ProblemInstance, c=None) -> float:
    """SQ upper bound with p = c over the heavy-load lower bound; at most 2 m^2."""
    c = instance.weights if c is None else np.asarray(c, dtype=np.float64)
    return sq_upper_bound(instance, c, c) / heavy_load_lower_bound(instance, c)


def theorem3_expansion(m: int, a: float) -> tuple[float, float]:
    """Upper and lower bound, in units of B * (lambda_a c_a), for the family
    lambda_a c_a = const: ``(m^3, m/2)`` to leading order."""
    return float(m ** 3), m / 2.0


@dataclass
class BoundReport:
    psi: float
    wstar: list[float]
    heavy_lower: float
    universal_lower: float
    sq_upper: float
    merge_upper: float
    factor: float

    def row(self) -> dict:
        d = asdict(self)
        w = d.pop("wstar")
        for k, x in enumerate(w):
            d[f"wstar{k + 1}"] = x
        return d


def bound_report(instance: ProblemInstance, c=None, p=None) -> BoundReport:
    c = instance.weights if c is None else np.asarray(c, dtype=np.float64)
    lower = heavy_load_lower_bound(instance, c)
    upper = sq_upper_bound(instance, c, p)
    return BoundReport(
        psi=psi(instance),
        wstar=[float(x) for x in wstar(instance)],
        heavy_lower=lower,
        universal_lower=universal_lower_bound(instance, c),
        sq_upper=upper,
        merge_upper=merge_upper_bound(instance),
        factor=upper / lower if lower > 0 else math.inf,
    )
