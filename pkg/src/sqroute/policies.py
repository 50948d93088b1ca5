"""Separate Queues and Merge policies as per-region iteration steps.

An iteration starts at an epoch: the vehicle snapshots the chosen queue(s),
builds a heuristic tour through them and serves every snapshot demand.
Demands arriving meanwhile are only appended to the queues once the
iteration ends, so they are first eligible at the next epoch.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import Demand, ProblemInstance, Region, region_median
from .stochastic import ArrivalProcess
from .tsp import heuristic_tour

P_TOL = 1e-9


@dataclass(frozen=True)
class SQConfig:
    """Class-selection probabilities of the SQ policy."""

    p: tuple[float, ...]

    def __post_init__(self):
        p = tuple(float(x) for x in self.p)
        object.__setattr__(self, "p", p)
        if any(not x > 0 for x in p):
            raise ValueError("every selection probability must be positive")
        if abs(sum(p) - 1.0) > P_TOL:
            raise ValueError(f"selection probabilities sum to {sum(p)}, not 1")


class DemandQueue:
    """Outstanding demands of one class, stored column-wise in arrival order."""

    __slots__ = ("class_idx", "ids", "xy", "arrival", "service")

    def __init__(self, class_idx: int):
        self.class_idx = class_idx
        self.ids = np.empty(0, dtype=np.int64)
        self.xy = np.empty((0, 2))
        self.arrival = np.empty(0)
        self.service = np.empty(0)

    def __len__(self):
        return len(self.ids)

    def extend(self, ids, xy, arrival, service):
        if len(ids) == 0:
            return
        self.ids = np.concatenate((self.ids, ids))
        self.xy = np.concatenate((self.xy, xy))
        self.arrival = np.concatenate((self.arrival, arrival))
        self.service = np.concatenate((self.service, service))

    def append(self, demand: Demand):
        self.extend(np.array([demand.id]), np.array([demand.location], dtype=np.float64),
                    np.array([demand.arrival_time]), np.array([demand.service_time]))

    def clear(self):
        self.__init__(self.class_idx)

    def demands(self) -> list[Demand]:
        return [Demand(int(i), self.class_idx, (float(x), float(y)), float(a), float(s))
                for i, (x, y), a, s in zip(self.ids, self.xy, self.arrival, self.service)]


@dataclass
class ServedBatch:
    """Demands completed in one iteration, column-wise in service order."""

    class_idx: np.ndarray
    ids: np.ndarray
    xy: np.ndarray
    arrival: np.ndarray
    service_time: np.ndarray
    service_start: np.ndarray
    completion: np.ndarray

    def __len__(self):
        return len(self.ids)

    @property
    def delay(self) -> np.ndarray:
        return self.completion - self.arrival

    @property
    def wait(self) -> np.ndarray:
        return self.service_start - self.arrival

    def demands(self) -> list[Demand]:
        return [Demand(int(i), int(k), (float(p[0]), float(p[1])), float(a), float(s), float(b), float(e))
                for i, k, p, a, s, b, e in zip(self.ids, self.class_idx, self.xy, self.arrival,
                                               self.service_time, self.service_start, self.completion)]


@dataclass
class VehicleState:
    """Mutable state of one vehicle; owned by a single region worker."""

    region: Region
    position: tuple[float, float]
    queues: list[DemandQueue]
    clock: float = 0.0
    next_id: int = 0

    @classmethod
    def initial(cls, region: Region, m: int) -> VehicleState:
        return cls(region, region_median(region), [DemandQueue(k) for k in range(m)])

    @property
    def queue_sizes(self) -> list[int]:
        return [len(q) for q in self.queues]

    def add_arrivals(self, class_idx: int, times, xy, service):
        k = len(times)
        ids = np.arange(self.next_id, self.next_id + k, dtype=np.int64)
        self.next_id += k
        self.queues[class_idx].extend(ids, xy, times, service)


@dataclass
class IterationRecord:
    epoch_start: float
    duration: float
    queue_sizes: tuple[int, ...]
    selected_class: int  # -1 for Merge
    tour_length: float  # distance actually driven, first leg included
    num_served: int


@dataclass
class RegionSources:
    """Per-class arrival processes feeding one region."""

    processes: list[ArrivalProcess] = field(default_factory=list)

    def next_arrival(self) -> float:
        return min((p.peek() for p in self.processes), default=np.inf)

    def inject(self, state: VehicleState, until: float):
        for k, proc in enumerate(self.processes):
            s = proc.advance(until)
            if len(s):
                state.add_arrivals(k, s.times, s.locations, s.service)


def sq_select_queue(queue_sizes: Sequence[int], p: Sequence[float], gen: np.random.Generator) -> int:
    """Draw a class from ``p`` conditioned on its queue being nonempty.

    Equivalent in law to redrawing from ``p`` until a nonempty queue comes
    up, but uses a single uniform draw.
    """
    sizes = np.asarray(queue_sizes)
    w = np.where(sizes > 0, np.asarray(p, dtype=np.float64), 0.0)
    total = w.sum()
    if not total > 0:
        raise ValueError("all queues are empty")
    cdf = np.cumsum(w) / total
    k = int(np.searchsorted(cdf, gen.random(), side="right"))
    k = min(k, len(cdf) - 1)
    while w[k] == 0:  # guard against a draw landing exactly on a flat cdf step
        k -= 1
    return k


def _service_route(points: np.ndarray, position) -> tuple[np.ndarray, float]:
    """Visit order over ``points`` and the distance driven from ``position``.

    The tour is entered at the demand nearest the vehicle (lowest index on
    ties) and traversed in the direction whose first edge is shorter.
    """
    n = len(points)
    pos = np.asarray(position, dtype=np.float64)
    d0 = np.hypot(points[:, 0] - pos[0], points[:, 1] - pos[1])
    if n == 1:
        return np.zeros(1, dtype=np.int64), float(d0[0])
    tour = heuristic_tour(points, position)
    order = tour.order
    first = int(np.argmin(d0))
    k = int(np.flatnonzero(order == first)[0])
    order = np.roll(order, -k)
    fwd = np.hypot(*(points[order[1]] - points[order[0]]))
    bwd = np.hypot(*(points[order[-1]] - points[order[0]]))
    if bwd < fwd:
        order = np.concatenate((order[:1], order[:0:-1]))
    path = points[order]
    legs = np.hypot(np.diff(path[:, 0]), np.diff(path[:, 1]))
    return order, float(d0[first] + legs.sum())


def _serve(state: VehicleState, classes: Sequence[int], instance: ProblemInstance,
           sources: RegionSources | None, selected: int) -> tuple[VehicleState, IterationRecord, ServedBatch]:
    t0 = state.clock
    sizes = tuple(state.queue_sizes)
    qs = [state.queues[k] for k in classes if len(state.queues[k])]
    cls = np.concatenate([np.full(len(q), q.class_idx, dtype=np.int64) for q in qs])
    ids = np.concatenate([q.ids for q in qs])
    xy = np.concatenate([q.xy for q in qs])
    arr = np.concatenate([q.arrival for q in qs])
    svc = np.concatenate([q.service for q in qs])
    if len(qs) > 1:  # keep the merged snapshot in id order for tie-breaking
        o = np.argsort(ids, kind="stable")
        cls, ids, xy, arr, svc = cls[o], ids[o], xy[o], arr[o], svc[o]
    for q in qs:
        q.clear()

    order, dist = _service_route(xy, state.position)
    path = xy[order]
    pos = np.asarray(state.position, dtype=np.float64)
    legs = np.hypot(np.diff(path[:, 0], prepend=pos[0]), np.diff(path[:, 1], prepend=pos[1]))
    s = svc[order]
    travel = np.cumsum(legs) / instance.v
    done_before = np.concatenate(([0.0], np.cumsum(s)[:-1]))
    start = t0 + travel + done_before
    finish = start + s
    duration = float(finish[-1] - t0)

    state.clock = t0 + duration
    state.position = (float(path[-1, 0]), float(path[-1, 1]))
    if sources is not None:
        sources.inject(state, state.clock)
    batch = ServedBatch(cls[order], ids[order], path, arr[order], s, start, finish)
    rec = IterationRecord(t0, duration, sizes, selected, dist, len(ids))
    return state, rec, batch


def sq_iteration(state: VehicleState, config: SQConfig, instance: ProblemInstance,
                 gen: np.random.Generator, sources: RegionSources | None = None):
    """One SQ iteration: pick a nonempty class by ``config.p`` and serve it all.

    Arrivals from ``sources`` up to the iteration's end are appended to the
    queues afterwards. Returns ``(state, record, served)``; ``state`` is
    updated in place.
    """
    k = sq_select_queue(state.queue_sizes, config.p, gen)
    return _serve(state, [k], instance, sources, k)


def merge_iteration(state: VehicleState, instance: ProblemInstance,
                    gen: np.random.Generator | None = None, sources: RegionSources | None = None):
    """One Merge iteration: serve the union of all queues along one tour."""
    if sum(state.queue_sizes) == 0:
        raise ValueError("all queues are empty")
    return _serve(state, range(len(state.queues)), instance, sources, -1)


def idle_step(state: VehicleState, instance: ProblemInstance, next_arrival_time: float) -> VehicleState:
    """Drive toward the region median until ``next_arrival_time``."""
    if sum(state.queue_sizes):
        raise ValueError("idle_step requires empty queues")
    target = np.asarray(region_median(state.region))
    pos = np.asarray(state.position, dtype=np.float64)
    gap = target - pos
    dist = float(np.hypot(*gap))
    dt = max(0.0, next_arrival_time - state.clock)
    reach = instance.v * dt
    if dist > 0:
        new = target if reach >= dist else pos + gap * (reach / dist)
        state.position = (float(new[0]), float(new[1]))
    state.clock = max(state.clock, next_arrival_time)
    return state
