"""Queue-length recursion of the SQ policy and its linear majorant.

Per region, with lambda_hat = lambda / n, the expected epoch queue lengths obey

    x(i+1) <= A x(i) + B sqrt(x(i))                       (System-X)

with A = diag(1 - p) + lambda_hat (p * s_bar)^T and
B = (beta sqrt|E| / (sqrt(n) v)) lambda_hat p^T. System-Y is the same map
with equality; System-Z replaces sqrt(a) by 1/(4 eps) + eps a.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ._backend import kernels
from .model import ProblemInstance, load_factor
from .tsp import BETA_TSP


@dataclass(frozen=True)
class RecursionMatrices:
    A: np.ndarray
    B: np.ndarray
    lam_hat: np.ndarray
    r: np.ndarray  # p * s_bar
    q: np.ndarray  # 1 - p
    tour_const: float  # beta sqrt|E| / (sqrt(n) v)

    @property
    def m(self) -> int:
        return len(self.q)


def build_matrices(instance: ProblemInstance, p) -> RecursionMatrices:
    p = np.asarray(p, dtype=np.float64)
    if len(p) != instance.m:
        raise ValueError("p has the wrong length")
    lam_hat = instance.rates / instance.n
    r = p * instance.means
    q = 1.0 - p
    kappa = BETA_TSP * math.sqrt(instance.env.area) / (math.sqrt(instance.n) * instance.v)
    A = np.outer(lam_hat, r) + np.diag(q)
    B = kappa * np.outer(lam_hat, p)
    return RecursionMatrices(np.ascontiguousarray(A), np.ascontiguousarray(B), lam_hat, r, q, kappa)


def system_y_step(mats: RecursionMatrices, y: np.ndarray) -> np.ndarray:
    return mats.A @ y + mats.B @ np.sqrt(y)


def iterate_system_y(mats: RecursionMatrices, y0, iterations: int) -> np.ndarray:
    """Trajectory ``y(0..iterations)`` of System-Y, shape ``(iterations + 1, m)``."""
    y = np.asarray(y0, dtype=np.float64)
    if np.any(y < 0):
        raise ValueError("System-Y needs a nonnegative initial condition")
    out = np.empty((iterations + 1, len(y)))
    out[0] = y
    for i in range(iterations):
        y = system_y_step(mats, y)
        out[i + 1] = y
    return out


def system_y_limit(mats: RecursionMatrices, y0, rtol: float = 1e-10,
                   max_iter: int = 10 ** 5) -> tuple[np.ndarray, int]:
    """Iterate System-Y until the relative step is below ``rtol``.

    Zero is a fixed point of the map, so a strictly positive start is
    needed to reach the nontrivial equilibrium.
    """
    y0 = np.ascontiguousarray(y0, dtype=np.float64)
    if np.any(y0 < 0):
        raise ValueError("System-Y needs a nonnegative initial condition")
    y, it = kernels.iterate_y(mats.A, mats.B, y0, int(max_iter), float(rtol))
    return np.asarray(y), int(it)


def theorem2_bound(instance: ProblemInstance, p) -> np.ndarray:
    """Closed-form limit of System-Y:
    beta^2 |E| / (n^3 v^2 (1-rho)^2) * (lambda_a / p_a) * (sum_j sqrt(lambda_j p_j))^2."""
    p = np.asarray(p, dtype=np.float64)
    rho = load_factor(instance)
    if not rho < 1:
        raise ValueError("load factor must be < 1")
    lam = instance.rates
    s = np.sum(np.sqrt(lam * p))
    scale = BETA_TSP ** 2 * instance.env.area / (instance.n ** 3 * instance.v ** 2 * (1 - rho) ** 2)
    return scale * lam / p * s * s


def _secular_roots(w: np.ndarray, poles: np.ndarray) -> list[float]:
    """Roots of sum_j w_j / (mu - poles_j) = 1 for distinct sorted poles, w > 0.

    The left side decreases between consecutive poles from +inf to -inf and
    from +inf to 0 beyond the last one, so there is exactly one root in each
    of those m intervals.
    """
    m = len(poles)

    def g(mu):
        with np.errstate(divide="ignore"):
            return float(np.sum(w / (mu - poles))) - 1.0

    roots = []
    for k in range(m):
        lo = poles[k]
        if k + 1 < m:
            hi = poles[k + 1]
        else:
            hi = poles[k] + float(np.sum(w)) + 1.0  # g(hi) < 0 here
        gap = hi - lo
        # step inward until the endpoint signs are strict
        eps = gap * 1e-15 + 1e-300
        a = lo + eps
        while g(a) <= 0 and eps < gap / 4:
            eps *= 16
            a = lo + eps
        eps = gap * 1e-15 + 1e-300
        b = hi - eps
        if k + 1 < m:
            while g(b) >= 0 and eps < gap / 4:
                eps *= 16
                b = hi - eps
        roots.append(brentq(g, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))
    return roots


def secular_eigenvalues(mats: RecursionMatrices, tie_tol: float = 1e-13) -> np.ndarray:
    """Eigenvalues of A = diag(q) + lambda_hat r^T from the secular equation.

    Poles q_j that coincide are merged (their weights add); each extra copy
    of a repeated pole is itself an eigenvalue.
    """
    w = mats.r * mats.lam_hat
    order = np.argsort(mats.q, kind="stable")
    q = mats.q[order]
    w = w[order]
    poles, weights, extra = [], [], []
    for qj, wj in zip(q, w):
        if poles and abs(qj - poles[-1]) <= tie_tol * max(1.0, abs(qj)):
            weights[-1] += wj
            extra.append(poles[-1])
        else:
            poles.append(qj)
            weights.append(wj)
    # a class with zero weight leaves its pole as an eigenvalue
    live = [k for k, wk in enumerate(weights) if wk > 0]
    dead = [poles[k] for k, wk in enumerate(weights) if not wk > 0]
    roots = _secular_roots(np.array([weights[k] for k in live]), np.array([poles[k] for k in live]))
    return np.sort(np.array(roots + extra + dead, dtype=np.float64))


def eigenvalues_of_A(mats: RecursionMatrices, imag_tol: float = 1e-9,
                     agree_tol: float = 1e-9) -> np.ndarray:
    """Real eigenvalues of A via the secular equation, checked against a dense solver.

    Raises ``ArithmeticError`` if the dense solver reports a complex pair
    or the two routes disagree.
    """
    ev = secular_eigenvalues(mats)
    dense = np.linalg.eigvals(mats.A)
    if np.max(np.abs(dense.imag)) > imag_tol:
        raise ArithmeticError(f"complex eigenvalue of A: {dense}")
    dense = np.sort(dense.real)
    if np.max(np.abs(dense - ev)) > agree_tol:
        raise ArithmeticError(f"secular roots {ev} disagree with dense eigenvalues {dense}")
    return ev


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def find_epsilon_stable(mats: RecursionMatrices, margin: float = 1e-6, kmax: int = 60) -> float:
    """Largest eps = 2^-k (k >= 1) with spectral radius(A + eps B) <= 1 - margin."""
    if not spectral_radius(mats.A) < 1:
        raise ValueError("A is not a stable matrix")
    for k in range(1, kmax + 1):
        eps = 2.0 ** -k
        if spectral_radius(mats.A + eps * mats.B) <= 1 - margin:
            return eps
    raise ArithmeticError(f"no stabilizing eps found down to 2^-{kmax}")


def system_z_step(mats: RecursionMatrices, z: np.ndarray, eps: float) -> np.ndarray:
    return (mats.A + eps * mats.B) @ z + mats.B @ np.ones(mats.m) / (4.0 * eps)


def iterate_system_z(mats: RecursionMatrices, z0, eps: float, iterations: int) -> np.ndarray:
    z = np.asarray(z0, dtype=np.float64)
    M = mats.A + eps * mats.B
    drive = mats.B @ np.ones(mats.m) / (4.0 * eps)
    out = np.empty((iterations + 1, len(z)))
    out[0] = z
    for i in range(iterations):
        z = M @ z + drive
        out[i + 1] = z
    return out


def system_z_equilibrium(mats: RecursionMatrices, eps: float, max_cond: float = 1e12) -> np.ndarray:
    """z* solving (I - A - eps B) z* = B 1 / (4 eps)."""
    M = np.eye(mats.m) - mats.A - eps * mats.B
    cond = np.linalg.cond(M)
    if not cond < max_cond:
        raise ArithmeticError(f"equilibrium system is near singular (cond {cond:.3g})")
    return np.linalg.solve(M, mats.B @ np.ones(mats.m) / (4.0 * eps))


def y_below_z(mats: RecursionMatrices, x0, iterations: int, eps: float | None = None) -> bool:
    """Exact componentwise check y(i) <= z(i) for a common start."""
    if eps is None:
        eps = find_epsilon_stable(mats)
    y = iterate_system_y(mats, x0, iterations)
    z = iterate_system_z(mats, x0, eps, iterations)
    return bool(np.all(y <= z))


@dataclass
class DominationResult:
    holds: bool
    epochs: list[int]
    simulated_mean: np.ndarray  # (len(epochs), m)
    simulated_se: np.ndarray
    y: np.ndarray
    z: np.ndarray


def verify_domination(instance: ProblemInstance, p, iterations: int, epochs=None, seeds: int = 20,
                      x0=None, base_seed: int = 0) -> DominationResult:
    """Check simulated E[N_i] <= y(i) <= z(i) at sampled epochs.

    The simulated side averages epoch queue sizes over ``seeds`` runs that
    all start from the same deterministic queue ``x0`` (default: the
    closed-form limit, rounded). ``E[N] <= y`` is judged with a two
    standard-error allowance; ``y <= z`` is exact.
    """
    from .engine import RunConfig, run_region

    if instance.n != 1:
        raise ValueError("domination check simulates a single region; use n = 1")
    p = tuple(float(x) for x in p)
    mats = build_matrices(instance, p)
    if x0 is None:
        x0 = np.rint(theorem2_bound(instance, p))
    x0 = np.asarray(x0, dtype=np.float64)
    epochs = sorted(epochs or [iterations])
    eps = find_epsilon_stable(mats)
    y = iterate_system_y(mats, x0, max(epochs))
    z = iterate_system_z(mats, x0, eps, max(epochs))
    chain_ok = bool(np.all(y <= z))

    cfg = dict(iterations=max(epochs) + 1, measurement_window=1, policy="sq", p=p,
               initial_queue=tuple(int(v) for v in x0))
    samples = np.empty((seeds, len(epochs), instance.m))
    for s in range(seeds):
        st = run_region(instance, 0, RunConfig(seed=base_seed + s, **cfg))
        sizes = np.array([r.queue_sizes for r in st.records])
        samples[s] = sizes[epochs]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(seeds)
    sim_ok = bool(np.all(mean <= y[epochs] + 2 * se))
    return DominationResult(chain_ok and sim_ok, epochs, mean, se, y[epochs], z[epochs])
