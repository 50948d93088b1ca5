"""Seeded sampling: Poisson arrival streams, uniform locations, on-site times.

Every random quantity in a run is drawn from a named substream keyed by
``(region, class, purpose)``, so changing how one stream is consumed never
perturbs another. Arrival processes draw in fixed-size blocks, which makes
the realized sequence independent of how a horizon is chunked.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

BLOCK = 256

KINDS = ("deterministic", "exponential", "uniform")


@dataclass(frozen=True)
class ServiceDistribution:
    """On-site service time law with mean ``mean``.

    ``half_width`` applies to the uniform kind only: draws lie in
    ``[mean - half_width, mean + half_width]``.
    """

    kind: str = "exponential"
    mean: float = 1.0
    half_width: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown service distribution {self.kind!r}")
        if not self.mean > 0:
            raise ValueError("service mean must be positive")
        if self.kind == "uniform":
            h = self.mean if self.half_width is None else self.half_width
            if not 0 <= h <= self.mean:
                raise ValueError("uniform half_width must lie in [0, mean]")
            object.__setattr__(self, "half_width", float(h))

    def scaled(self, factor: float) -> ServiceDistribution:
        """Same shape, mean multiplied by ``factor``."""
        h = None if self.half_width is None else self.half_width * factor
        return ServiceDistribution(self.kind, self.mean * factor, h)

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "deterministic":
            return self.mean if size is None else np.full(size, self.mean)
        if self.kind == "exponential":
            return rng.exponential(self.mean, size)
        return rng.uniform(self.mean - self.half_width, self.mean + self.half_width, size)


def sample_service(dist: ServiceDistribution, gen: np.random.Generator) -> float:
    return float(dist.sample(gen))


def _purpose_code(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


class SeededGenerator:
    """Root seed from which independent named substreams are derived."""

    def __init__(self, seed: int):
        if not 0 <= int(seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)

    def stream(self, region: int, class_idx: int, purpose: str) -> np.random.Generator:
        key = (int(region), int(class_idx), _purpose_code(purpose))
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=key)))

    def __repr__(self):
        return f"SeededGenerator({self.seed})"


@dataclass
class ArrivalStream:
    """Arrivals of one class: increasing times and their planar locations."""

    class_idx: int
    times: np.ndarray
    locations: np.ndarray
    service: np.ndarray | None = None

    def __len__(self):
        return len(self.times)


@dataclass
class ArrivalProcess:
    """Continuable Poisson stream of one class over one rectangle.

    Gaps, locations and (optionally) on-site times are drawn ``BLOCK`` at a
    time from separate generators, so ``advance(T); advance(2T)`` yields the
    same demands as a single ``advance(2T)``.
    """

    rate: float
    bounds: tuple[float, float, float, float]
    rng: np.random.Generator
    class_idx: int = 0
    service: ServiceDistribution | None = None
    service_rng: np.random.Generator | None = None
    clock: float = 0.0
    _buf_t: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    _buf_xy: np.ndarray = field(default_factory=lambda: np.empty((0, 2)), repr=False)
    _buf_s: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    _last: float = 0.0

    def _refill(self):
        gaps = self.rng.exponential(1.0 / self.rate, BLOCK)
        x0, y0, x1, y1 = self.bounds
        u = self.rng.random((BLOCK, 2))
        xy = np.column_stack((x0 + (x1 - x0) * u[:, 0], y0 + (y1 - y0) * u[:, 1]))
        times = self._last + np.cumsum(gaps)
        self._last = times[-1]
        self._buf_t = np.concatenate((self._buf_t, times))
        self._buf_xy = np.concatenate((self._buf_xy, xy))
        if self.service is not None:
            s = np.asarray(self.service.sample(self.service_rng, BLOCK), dtype=np.float64)
            self._buf_s = np.concatenate((self._buf_s, s))

    def peek(self) -> float:
        """Time of the next arrival not yet returned."""
        if self.rate <= 0:
            return np.inf
        if len(self._buf_t) == 0:
            self._refill()
        return float(self._buf_t[0])

    def advance(self, until: float) -> ArrivalStream:
        """Return arrivals in ``(clock, until]`` and move the clock to ``until``."""
        if self.rate <= 0 or until <= self.clock:
            self.clock = max(self.clock, until)
            return ArrivalStream(self.class_idx, np.empty(0), np.empty((0, 2)),
                                 np.empty(0) if self.service is not None else None)
        while self._last <= until:
            self._refill()
        k = int(np.searchsorted(self._buf_t, until, side="right"))
        out = ArrivalStream(self.class_idx, self._buf_t[:k], self._buf_xy[:k],
                            self._buf_s[:k] if self.service is not None else None)
        self._buf_t = self._buf_t[k:]
        self._buf_xy = self._buf_xy[k:]
        if self.service is not None:
            self._buf_s = self._buf_s[k:]
        self.clock = until
        return out


def sample_arrivals(rate: float, region, horizon: float, gen: np.random.Generator,
                    class_idx: int = 0) -> ArrivalStream:
    """Poisson(rate) arrivals on ``[0, horizon]`` with uniform locations in ``region``.

    ``region`` is anything with ``bounds`` ``(x0, y0, x1, y1)`` or the tuple itself.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    bounds = tuple(getattr(region, "bounds", region))
    return ArrivalProcess(rate, bounds, gen, class_idx).advance(horizon)
