"""Heuristic traveling-salesperson tours and Monte Carlo estimates of beta_TSP.

Tours are built with nearest-neighbour construction followed by 2-opt.
Small instances get the exhaustive lexicographic 2-opt scan; larger ones use
K-nearest-neighbour candidate lists with don't-look bits, which reaches a
comparable local optimum in roughly linear time per sweep.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ._backend import kernels

#: Published estimate of the BHH constant for uniform points in the plane.
BETA_TSP = 0.7120

#: Tours above this size switch from the full scan to candidate-list 2-opt.
FULL_SCAN_LIMIT = 600
DEFAULT_MAX_PASSES = 30
NEIGHBOR_K = 10


@dataclass(frozen=True)
class Tour:
    """A closed tour through a point set."""

    order: np.ndarray
    length: float

    def __len__(self) -> int:
        return len(self.order)


def _as_points(points) -> np.ndarray:
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or (pts.size and pts.shape[1] != 2):
        raise ValueError(f"points must have shape (N, 2), got {pts.shape}")
    return pts.reshape(-1, 2)


def _xy(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1])


def tour_length(points, order) -> float:
    """Length of the closed cycle visiting ``points`` in ``order``."""
    pts = _as_points(points)
    order = np.ascontiguousarray(order, dtype=np.int64)
    n = len(pts)
    if n == 0:
        raise ValueError("tour needs at least one point")
    if len(order) != n or not np.array_equal(np.sort(order), np.arange(n)):
        raise ValueError("order is not a permutation of the point indices")
    xs, ys = _xy(pts)
    return float(kernels.tour_length(xs, ys, order))


def nearest_neighbor_tour(points, start_point=(0.0, 0.0)) -> Tour:
    """Greedy tour starting at the point nearest ``start_point``.

    Ties at every step go to the lower point index.
    """
    pts = _as_points(points)
    if len(pts) == 0:
        raise ValueError("tour needs at least one point")
    xs, ys = _xy(pts)
    order = np.asarray(kernels.nearest_neighbor_order(xs, ys, float(start_point[0]),
                                                      float(start_point[1])))
    return Tour(order, float(kernels.tour_length(xs, ys, order)))


def _neighbor_lists(pts: np.ndarray, k: int) -> np.ndarray:
    k = min(k, len(pts) - 1)
    _, idx = cKDTree(pts, balanced_tree=False, compact_nodes=False).query(pts, k=k + 1)
    return np.ascontiguousarray(idx[:, 1:], dtype=np.int64)


def two_opt_improve(tour: Tour, points, max_passes: int = DEFAULT_MAX_PASSES,
                    full_scan_limit: int = FULL_SCAN_LIMIT, neighbors=None) -> Tour:
    """Apply improving 2-opt exchanges until none remain or the pass cap is hit.

    For ``len(tour) <= full_scan_limit`` every pass scans all edge pairs (i, j)
    in lexicographic order and applies the first improving exchange found
    before continuing the scan. Larger tours use candidate lists of the
    ``NEIGHBOR_K`` nearest points (or ``neighbors``), capped at
    ``max_passes * N`` moves. The returned length never exceeds the input length.
    """
    pts = _as_points(points)
    xs, ys = _xy(pts)
    t = np.array(tour.order, dtype=np.int64)
    n = len(t)
    if n <= full_scan_limit:
        kernels.two_opt_scan(xs, ys, t, int(max_passes))
    else:
        nbr = _neighbor_lists(pts, NEIGHBOR_K) if neighbors is None else neighbors
        kernels.two_opt_neighbors(xs, ys, t, nbr, int(max_passes) * n)
    length = float(kernels.tour_length(xs, ys, t))
    if length > tour.length:  # numerical guard, should not trigger
        return tour
    return Tour(t, length)


def or_opt_polish(tour: Tour, points, max_passes: int = DEFAULT_MAX_PASSES, neighbors=None) -> Tour:
    """Candidate-list local search mixing 2-opt and Or-opt segment moves.

    Segments of one to three consecutive cities are reinserted, in either
    orientation, next to one of their ``NEIGHBOR_K`` nearest points.
    """
    pts = _as_points(points)
    n = len(tour)
    if n < 8:
        return tour
    xs, ys = _xy(pts)
    t = np.array(tour.order, dtype=np.int64)
    nbr = _neighbor_lists(pts, NEIGHBOR_K) if neighbors is None else neighbors
    kernels.two_opt_neighbors(xs, ys, t, nbr, int(max_passes) * n, True)
    length = float(kernels.tour_length(xs, ys, t))
    if length > tour.length:
        return tour
    return Tour(t, length)


def heuristic_tour(points, start_point=(0.0, 0.0), max_passes: int = DEFAULT_MAX_PASSES) -> Tour:
    """The production tour builder: nearest neighbour, 2-opt, then Or-opt polish."""
    pts = _as_points(points)
    nbr = _neighbor_lists(pts, NEIGHBOR_K) if len(pts) >= 8 else None
    tour = two_opt_improve(nearest_neighbor_tour(pts, start_point), pts, max_passes, neighbors=nbr)
    return or_opt_polish(tour, pts, max_passes, neighbors=nbr)


def exhaustive_tour(points) -> Tour:
    """Exact optimum by enumerating permutations. Test oracle for N <= 9."""
    pts = _as_points(points)
    n = len(pts)
    if n == 0:
        raise ValueError("tour needs at least one point")
    if n > 9:
        raise ValueError("exhaustive search limited to 9 points")
    if n <= 3:
        order = np.arange(n, dtype=np.int64)
        return Tour(order, tour_length(pts, order))
    dist = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
    best, best_order = np.inf, None
    # fix point 0 first and drop mirror images
    for perm in itertools.permutations(range(1, n)):
        if perm[0] > perm[-1]:
            continue
        seq = (0,) + perm
        length = sum(dist[seq[k], seq[k + 1]] for k in range(n - 1)) + dist[seq[-1], 0]
        if length < best:
            best, best_order = length, seq
    return Tour(np.array(best_order, dtype=np.int64), float(best))


def estimate_beta(N: int, trials: int, gen: np.random.Generator) -> float:
    """Mean of heuristic tour length / sqrt(N |E|) over uniform points in the unit square."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if N < 15:
        raise ValueError("N must be >= 15 for the asymptotic estimate to be meaningful")
    return float(np.mean(beta_samples(N, trials, gen)))


def beta_samples(N: int, trials: int, gen: np.random.Generator) -> np.ndarray:
    """Per-trial normalized heuristic tour lengths."""
    out = np.empty(trials)
    for k in range(trials):
        pts = gen.random((N, 2))
        out[k] = heuristic_tour(pts, (0.5, 0.5)).length / np.sqrt(N)
    return out
