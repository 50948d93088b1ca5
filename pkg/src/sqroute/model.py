"""Problem definition: environment, priority classes, load factor, partitioning.

Class indices are 0-based throughout the package; class 0 has the highest
priority, i.e. the largest weight-to-rate ratio c/lambda.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .stochastic import ServiceDistribution

WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class Environment:
    """Axis-aligned rectangle ``[0, width] x [0, height]``."""

    width: float = 1.0
    height: float = 1.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("environment sides must be positive")

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class ClassSpec:
    rate: float
    service: ServiceDistribution
    weight: float

    @property
    def mean_service(self) -> float:
        return self.service.mean


@dataclass(frozen=True)
class ProblemInstance:
    """Environment, fleet and ordered list of priority classes."""

    classes: tuple[ClassSpec, ...]
    n: int = 1
    v: float = 1.0
    env: Environment = field(default_factory=Environment)

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def m(self) -> int:
        return len(self.classes)

    @property
    def rates(self) -> np.ndarray:
        return np.array([c.rate for c in self.classes], dtype=np.float64)

    @property
    def means(self) -> np.ndarray:
        return np.array([c.mean_service for c in self.classes], dtype=np.float64)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.classes], dtype=np.float64)

    @property
    def total_rate(self) -> float:
        return float(self.rates.sum())

    def with_classes(self, classes: Sequence[ClassSpec]) -> ProblemInstance:
        return replace(self, classes=tuple(classes))


def make_instance(rates, means, weights, n: int = 1, v: float = 1.0,
                  env: Environment | None = None, kind: str = "exponential") -> ProblemInstance:
    """Convenience constructor from parallel sequences."""
    classes = tuple(ClassSpec(float(lam), ServiceDistribution(kind, float(s)), float(c))
                    for lam, s, c in zip(rates, means, weights, strict=True))
    return ProblemInstance(classes, n, v, env or Environment())


@dataclass(frozen=True)
class Region:
    """Rectangle ``[x0, x1] x [y0, y1]`` served by one vehicle."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def contains(self, point) -> bool:
        x, y = point
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


@dataclass(slots=True)
class Demand:
    """One service request; timestamps are filled in as it is served."""

    id: int
    class_idx: int
    location: tuple[float, float]
    arrival_time: float
    service_time: float = 0.0
    service_start: float | None = None
    completion_time: float | None = None

    @property
    def delay(self) -> float | None:
        if self.completion_time is None:
            return None
        return self.completion_time - self.arrival_time

    @property
    def wait(self) -> float | None:
        if self.service_start is None:
            return None
        return self.service_start - self.arrival_time


def load_factor(instance: ProblemInstance) -> float:
    """Fraction of fleet time spent on site: sum(lambda * s_bar) / n."""
    return float(np.dot(instance.rates, instance.means) / instance.n)


def validate_instance(instance: ProblemInstance) -> list[str]:
    """Every violated invariant, as human-readable strings; [] when valid."""
    problems = []
    if instance.m == 0:
        return ["no priority classes"]
    if instance.n < 1 or int(instance.n) != instance.n:
        problems.append(f"fleet size n={instance.n} must be a positive integer")
    if not instance.v > 0:
        problems.append(f"speed v={instance.v} must be positive")
    lam, s, c = instance.rates, instance.means, instance.weights
    for k in range(instance.m):
        if not lam[k] > 0:
            problems.append(f"class {k}: arrival rate {lam[k]} must be positive")
        if not s[k] > 0:
            problems.append(f"class {k}: mean service {s[k]} must be positive")
        if not c[k] > 0:
            problems.append(f"class {k}: weight {c[k]} must be positive")
    if abs(c.sum() - 1.0) > WEIGHT_TOL:
        problems.append(f"weights sum to {c.sum():.12g}, not 1")
    if np.all(lam > 0):
        ratio = c / lam
        for k in range(instance.m - 1):
            if ratio[k] < ratio[k + 1] * (1 - 1e-12):
                problems.append(f"ordering: c/lambda of class {k} ({ratio[k]:.6g}) is below "
                                f"class {k + 1} ({ratio[k + 1]:.6g})")
    if instance.n >= 1:
        rho = load_factor(instance)
        if not rho < 1:
            problems.append(f"stability: load factor {rho:.6g} must be < 1")
    return problems


def priority_order(classes: Sequence[ClassSpec]) -> list[int]:
    """Indices sorting classes by nonincreasing c/lambda; ties keep input order."""
    ratio = [c.weight / c.rate for c in classes]
    return sorted(range(len(classes)), key=lambda k: -ratio[k])


def normalize_to_load(classes: Sequence[ClassSpec], target_load: float, n: int = 1) -> list[ClassSpec]:
    """Rescale service means to hit ``target_load`` and weights to sum to one.

    Service means share one scale factor; the result is re-sorted into
    priority order.
    """
    if not 0 < target_load < 1:
        raise ValueError("target load must lie in (0, 1)")
    lam = np.array([c.rate for c in classes], dtype=np.float64)
    s = np.array([c.mean_service for c in classes], dtype=np.float64)
    w = np.array([c.weight for c in classes], dtype=np.float64)
    if not np.any(lam > 0):
        raise ValueError("all arrival rates are zero")
    work = float(np.dot(lam, s))
    if not work > 0:
        raise ValueError("all service means are zero")
    if not w.sum() > 0:
        raise ValueError("all weights are zero")
    factor = target_load * n / work
    w = w / w.sum()
    out = [ClassSpec(c.rate, c.service.scaled(factor), float(wk)) for c, wk in zip(classes, w)]
    return [out[k] for k in priority_order(out)]


def equal_area_partition(env: Environment, n: int) -> list[Region]:
    """``n`` vertical strips of equal width tiling the environment."""
    if n < 1:
        raise ValueError("need at least one region")
    edges = [env.width * k / n for k in range(n)] + [env.width]
    return [Region(edges[k], 0.0, edges[k + 1], env.height) for k in range(n)]


def region_median(region: Region) -> tuple[float, float]:
    """Centroid of the rectangle; vehicles idle here."""
    return (0.5 * (region.x0 + region.x1), 0.5 * (region.y0 + region.y1))
