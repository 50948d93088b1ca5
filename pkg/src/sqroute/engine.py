"""Per-region iteration loops and steady-state statistics.

Regions never interact, so a run is ``n`` independent single-vehicle
simulations whose statistics are pooled afterwards in region order.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import ProblemInstance, equal_area_partition
from .policies import (IterationRecord, RegionSources, SQConfig, VehicleState, idle_step,
                       merge_iteration, sq_iteration)
from .stochastic import ArrivalProcess, SeededGenerator

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    """Run length, estimator window and policy.

    ``p=None`` means SQ with ``p = c``. ``initial_queue`` seeds each class
    queue with that many demands (uniform locations, arrival time 0).
    """

    iterations: int = 4000
    measurement_window: int = 1000
    seed: int = 0
    policy: str = "sq"
    p: tuple[float, ...] | None = None
    queue_cap: int = 10 ** 6
    initial_queue: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 0 < self.measurement_window <= self.iterations:
            raise ValueError("need 0 < measurement_window <= iterations")
        if self.policy not in ("sq", "merge"):
            raise ValueError(f"unknown policy {self.policy!r}")


@dataclass
class RunStats:
    """Per-class steady-state estimates over the measurement window.

    ``mean_queue`` averages the epoch snapshots N_{alpha,i};
    ``mean_queue_time`` is the time average of the number of waiting
    demands over the window. Region-level statistics use per-region
    rates lambda/n; pooled statistics average queue lengths over regions.
    """

    served: np.ndarray
    mean_delay: np.ndarray
    mean_wait: np.ndarray
    mean_service: np.ndarray
    mean_queue: np.ndarray
    mean_queue_time: np.ndarray
    window_duration: float = 0.0
    epochs: int = 0
    unstable: bool = False
    records: list[IterationRecord] = field(default_factory=list, repr=False)
    regions: list["RunStats"] = field(default_factory=list, repr=False)

    @property
    def m(self) -> int:
        return len(self.served)

    def cost(self, weights) -> float:
        return empirical_cost(self, weights)


def empirical_cost(stats: RunStats, weights) -> float:
    """sum_alpha c_alpha * D_alpha."""
    w = np.asarray(weights, dtype=np.float64)
    if len(w) != stats.m:
        raise ValueError("weights and stats disagree on the number of classes")
    return float(np.dot(w, stats.mean_delay))


def queue_delay_estimate(stats: RunStats, instance: ProblemInstance) -> np.ndarray:
    """Per-class delay from epoch queue counts via Little's law: N / (lambda/n) + s_bar."""
    return stats.mean_queue / (instance.rates / instance.n) + instance.means


def queue_cost(stats: RunStats, instance: ProblemInstance, weights=None) -> float:
    w = instance.weights if weights is None else np.asarray(weights, dtype=np.float64)
    return float(np.dot(w, queue_delay_estimate(stats, instance)))


def _sources(instance: ProblemInstance, region, region_idx: int, gen: SeededGenerator) -> RegionSources:
    procs = []
    for k, spec in enumerate(instance.classes):
        procs.append(ArrivalProcess(spec.rate / instance.n, region.bounds,
                                    gen.stream(region_idx, k, "arrivals"), k, spec.service,
                                    gen.stream(region_idx, k, "service")))
    return RegionSources(procs)


def _seed_queues(state: VehicleState, instance: ProblemInstance, counts, region_idx: int,
                 gen: SeededGenerator):
    x0, y0, x1, y1 = state.region.bounds
    for k, cnt in enumerate(counts):
        cnt = int(cnt)
        if cnt <= 0:
            continue
        rng = gen.stream(region_idx, k, "initial")
        u = rng.random((cnt, 2))
        xy = np.column_stack((x0 + (x1 - x0) * u[:, 0], y0 + (y1 - y0) * u[:, 1]))
        svc = np.asarray(instance.classes[k].service.sample(rng, cnt), dtype=np.float64)
        state.add_arrivals(k, np.zeros(cnt), xy, svc)


def run_region(instance: ProblemInstance, region_idx: int, config: RunConfig) -> RunStats:
    """Simulate one vehicle in its region for ``config.iterations`` epochs."""
    m = instance.m
    region = equal_area_partition(instance.env, instance.n)[region_idx]
    gen = SeededGenerator(config.seed)
    sources = _sources(instance, region, region_idx, gen)
    select_rng = gen.stream(region_idx, 0, "select")
    sq = SQConfig(tuple(config.p) if config.p is not None else tuple(instance.weights))
    state = VehicleState.initial(region, m)
    if config.initial_queue is not None:
        _seed_queues(state, instance, config.initial_queue, region_idx, gen)

    first_window = config.iterations - config.measurement_window
    records: list[IterationRecord] = []
    batches = []
    window_start = None
    unstable = False
    epochs = 0
    while epochs < config.iterations:
        total = sum(state.queue_sizes)
        if total == 0:
            t_next = sources.next_arrival()
            if not np.isfinite(t_next):
                break
            idle_step(state, instance, t_next)
            sources.inject(state, t_next)
            continue
        if total > config.queue_cap:
            log.warning("region %d: %d outstanding demands exceed cap, aborting", region_idx, total)
            unstable = True
            break
        if epochs == first_window:
            window_start = state.clock
        if config.policy == "sq":
            state, rec, batch = sq_iteration(state, sq, instance, select_rng, sources)
        else:
            state, rec, batch = merge_iteration(state, instance, select_rng, sources)
        records.append(rec)
        epochs += 1
        if epochs > first_window:
            batches.append(batch)

    return _window_stats(m, records[first_window:], batches, state, window_start, epochs,
                         unstable, records)


def _window_stats(m, window_records, batches, state, window_start, epochs, unstable, records) -> RunStats:
    zeros = np.zeros(m)
    if not batches:
        return RunStats(np.zeros(m, dtype=np.int64), zeros.copy(), zeros.copy(), zeros.copy(),
                        zeros.copy(), zeros.copy(), 0.0, epochs, unstable, records)
    cls = np.concatenate([b.class_idx for b in batches])
    arr = np.concatenate([b.arrival for b in batches])
    start = np.concatenate([b.service_start for b in batches])
    done = np.concatenate([b.completion for b in batches])
    svc = np.concatenate([b.service_time for b in batches])
    window_end = state.clock
    span = window_end - window_start

    served = np.bincount(cls, minlength=m)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_delay = np.bincount(cls, done - arr, m) / served
        mean_wait = np.bincount(cls, start - arr, m) / served
        mean_service = np.bincount(cls, svc, m) / served
    for a in (mean_delay, mean_wait, mean_service):
        a[served == 0] = 0.0
    mean_queue = np.mean([r.queue_sizes for r in window_records], axis=0)

    # time integral of the number of waiting demands over the window
    waited = np.bincount(cls, start - np.maximum(arr, window_start), m)
    for k, q in enumerate(state.queues):
        if len(q):
            waited[k] += np.sum(window_end - np.maximum(q.arrival, window_start))
    mean_queue_time = waited / span if span > 0 else np.zeros(m)
    return RunStats(served, mean_delay, mean_wait, mean_service, mean_queue, mean_queue_time,
                    float(span), epochs, unstable, records)


def _region_task(args):
    instance, k, config = args
    return run_region(instance, k, config)


def run_simulation(instance: ProblemInstance, config: RunConfig, workers: int = 1) -> RunStats:
    """Run every region and pool their statistics.

    Delays are served-count weighted across regions; queue lengths are
    averaged over regions. With ``workers > 1`` regions run in separate
    processes; results are still combined in region order.
    """
    tasks = [(instance, k, config) for k in range(instance.n)]
    if workers > 1 and instance.n > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            regions = list(pool.map(_region_task, tasks))
    else:
        regions = [_region_task(t) for t in tasks]
    if instance.n == 1:
        return regions[0]
    return pool_stats(regions)


def pool_stats(regions: list[RunStats]) -> RunStats:
    served = np.sum([r.served for r in regions], axis=0)

    def weighted(attr):
        tot = np.sum([r.served * getattr(r, attr) for r in regions], axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = tot / served
        out[served == 0] = 0.0
        return out

    return RunStats(
        served=served,
        mean_delay=weighted("mean_delay"),
        mean_wait=weighted("mean_wait"),
        mean_service=weighted("mean_service"),
        mean_queue=np.mean([r.mean_queue for r in regions], axis=0),
        mean_queue_time=np.mean([r.mean_queue_time for r in regions], axis=0),
        window_duration=float(np.mean([r.window_duration for r in regions])),
        epochs=int(sum(r.epochs for r in regions)),
        unstable=any(r.unstable for r in regions),
        regions=regions,
    )


def stats_row(stats: RunStats, instance: ProblemInstance, config: RunConfig) -> dict:
    """Flat CSV row for one run."""
    from .model import load_factor

    row = {
        "seed": config.seed,
        "rho": round(load_factor(instance), 12),
        "m": instance.m,
        "n": instance.n,
        "policy": config.policy,
    }
    for k in range(instance.m):
        row[f"D{k + 1}"] = float(stats.mean_delay[k])
        row[f"W{k + 1}"] = float(stats.mean_wait[k])
        row[f"N{k + 1}"] = float(stats.mean_queue[k])
    row["cost"] = empirical_cost(stats, instance.weights)
    row["unstable"] = int(stats.unstable)
    return row
