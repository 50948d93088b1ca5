"""Batch experiments: bound tightness, worst-case family, p optimization,
Merge vs SQ, single-instance bound reports and beta estimation.

Each ``exp_*`` returns a list of ``Table`` objects; ``run_experiment``
writes them as CSV (with a provenance header) plus gnuplot data files and
a manifest. Runs are independent tasks seeded from (seed, experiment,
point, run), so results do not depend on the number of workers.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
from scipy.stats import spearmanr

from . import __version__
from ._backend import BACKEND
from .bounds import (bound_report, factor_ratio, heavy_load_lower_bound, merge_upper_bound,
                     sq_upper_bound, theorem3_expansion)
from .config import ExperimentConfig
from .engine import RunConfig, empirical_cost, queue_cost, run_simulation
from .model import ClassSpec, Environment, ProblemInstance, load_factor, normalize_to_load
from .popt import optimize_p_multistart, optimize_p_two_class
from .stochastic import ServiceDistribution
from .tsp import beta_samples

EXP_CODES = {"tightness": 1, "worstcase": 2, "popt": 3, "merge": 4, "bounds-report": 5,
             "beta-estimate": 6}


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    plot: tuple[str, str] | None = None  # (x column, y column) for a .dat file

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]


def seed_for(*keys: int) -> int:
    """Deterministic 63-bit seed from integer keys."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


def rng_for(*keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def _env(cfg: ExperimentConfig) -> Environment:
    return Environment(cfg.width, cfg.height)


def _map(cfg: ExperimentConfig, fn, tasks: list) -> list:
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _summary(values) -> tuple[float, float, float, float]:
    x = np.asarray(values, dtype=np.float64)
    if len(x) == 0:
        return (math.nan,) * 4
    sd = float(x.std(ddof=1)) if len(x) > 1 else 0.0
    return float(x.mean()), sd, float(x.max()), float(x.min())


# ---------------------------------------------------------------- tightness

def random_instance(rng: np.random.Generator, m: int, rho: float, n: int = 1, v: float = 1.0,
                    env: Environment | None = None, kind: str = "exponential") -> ProblemInstance:
    """Uniform(0,1) rates, weights and service means, normalized to load ``rho`` and sum(c) = 1."""
    lam, c, s = rng.random(m), rng.random(m), rng.random(m)
    classes = [ClassSpec(float(lam[k]), ServiceDistribution(kind, float(s[k])), float(c[k]))
               for k in range(m)]
    return ProblemInstance(tuple(normalize_to_load(classes, rho, n)), n, v, env or Environment())


def _tightness_task(args):
    cfg, k, rho, r = args
    inst = random_instance(rng_for(cfg.seed, 1, k, r), cfg.param("m"), rho, cfg.param("n") or cfg.n,
                           cfg.v, _env(cfg), cfg.service)
    rc = RunConfig(cfg.iterations, cfg.window, seed_for(cfg.seed, 1, k, r, 1))
    st = run_simulation(inst, rc)
    ub = sq_upper_bound(inst)
    return k, r, queue_cost(st, inst) / ub, empirical_cost(st, inst.weights) / ub, st.unstable


def exp_tightness(cfg: ExperimentConfig) -> list[Table]:
    """chi = simulated cost / SQ upper bound (p = c) over random instances per load.

    ``chi`` uses delays from epoch queue counts and Little's law;
    ``chi_timestamp`` uses per-demand timestamps.
    """
    rhos = [float(x) for x in cfg.param("rhos")]
    tasks = [(cfg, k, rho, r) for k, rho in enumerate(rhos) for r in range(cfg.runs)]
    results = _map(cfg, _tightness_task, tasks)
    runs = Table("tightness_runs", ["rho", "run", "chi", "chi_timestamp", "unstable"])
    table = Table("tightness", ["rho", "mean_chi", "std_chi", "max_chi", "min_chi",
                                "mean_chi_timestamp", "runs_used", "unstable"], plot=("rho", "mean_chi"))
    for k, rho in enumerate(rhos):
        mine = [x for x in results if x[0] == k]
        for _, r, chi, chi_ts, bad in mine:
            runs.rows.append([rho, r, chi, chi_ts, int(bad)])
        good = [x for x in mine if not x[4]]
        mean, sd, hi, lo = _summary([x[2] for x in good])
        ts_mean = _summary([x[3] for x in good])[0]
        table.rows.append([rho, mean, sd, hi, lo, ts_mean, len(good), len(mine) - len(good)])
    return [table, runs]


# ---------------------------------------------------------------- worst case

def worstcase_instance(m: int, a: float = 2.0, rho: float = 0.85, lambda1: float = 1.0, n: int = 1,
                       v: float = 1.0, env: Environment | None = None,
                       kind: str = "exponential") -> ProblemInstance:
    """lambda_k = lambda1 a^k, c_k proportional to a^-k, common service mean at load ``rho``."""
    lam = lambda1 * a ** np.arange(m)
    c = a ** -np.arange(m, dtype=np.float64)
    c /= c.sum()
    s = rho * n / lam.sum()
    classes = tuple(ClassSpec(float(lam[k]), ServiceDistribution(kind, s), float(c[k])) for k in range(m))
    return ProblemInstance(classes, n, v, env or Environment())


def _worstcase_instance(cfg: ExperimentConfig, m: int) -> ProblemInstance:
    return worstcase_instance(m, float(cfg.param("a")), float(cfg.param("rho")),
                              float(cfg.param("lambda1")), int(cfg.param("n")), cfg.v, _env(cfg),
                              cfg.service)


def _worstcase_task(args):
    cfg, m, r = args
    inst = _worstcase_instance(cfg, m)
    st = run_simulation(inst, RunConfig(cfg.iterations, cfg.window, seed_for(cfg.seed, 2, m, r)))
    return m, r, empirical_cost(st, inst.weights), queue_cost(st, inst), st.unstable


def log_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])


def exp_worstcase(cfg: ExperimentConfig) -> list[Table]:
    ms = [int(x) for x in cfg.param("ms")]
    results = _map(cfg, _worstcase_task, [(cfg, m, r) for m in ms for r in range(cfg.runs)])
    table = Table("worstcase", ["m", "mean_cost", "mean_cost_queue", "lower", "upper", "bound_ratio",
                                "leading_order_ratio", "cost_over_lower", "runs_used", "unstable"],
                  plot=("m", "cost_over_lower"))
    for m in ms:
        inst = _worstcase_instance(cfg, m)
        mine = [x for x in results if x[0] == m]
        good = [x for x in mine if not x[4]]
        cost = float(np.mean([x[2] for x in good])) if good else math.nan
        qcost = float(np.mean([x[3] for x in good])) if good else math.nan
        lo, up = heavy_load_lower_bound(inst), sq_upper_bound(inst)
        u, l = theorem3_expansion(m, float(cfg.param("a")))
        table.rows.append([m, cost, qcost, lo, up, up / lo, u / l, cost / lo, len(good),
                           len(mine) - len(good)])
    fit = Table("worstcase_fit", ["quantity", "slope"])
    ok = [r for r in table.rows if np.isfinite(r[7])]
    if len(ok) >= 2:
        fit.rows.append(["cost_over_lower", log_slope([r[0] for r in ok], [r[7] for r in ok])])
        fit.rows.append(["bound_ratio", log_slope([r[0] for r in ok], [r[5] for r in ok])])
    return [table, fit]


# ---------------------------------------------------------------- p optimization

def _popt_task(args):
    cfg, m, r = args
    rng = rng_for(cfg.seed, 3, m, r)
    inst = random_instance(rng, m, float(cfg.param("rho")), 1, cfg.v, _env(cfg), cfg.service)
    res = optimize_p_multistart(inst, starts=int(cfg.param("starts")), gen=rng)
    return m, r, res.ratio, res.starts_spread


def exp_popt(cfg: ExperimentConfig) -> list[Table]:
    ms = [int(x) for x in cfg.param("ms")]
    results = _map(cfg, _popt_task, [(cfg, m, r) for m in ms for r in range(cfg.runs)])
    table = Table("popt", ["m", "max_ratio", "mean_ratio", "max_spread_pct", "runs"], plot=("m", "max_ratio"))
    for m in ms:
        mine = [x for x in results if x[0] == m]
        ratios = [x[2] for x in mine]
        table.rows.append([m, max(ratios), float(np.mean(ratios)), 100 * max(x[3] for x in mine), len(mine)])
    grid = int(cfg.param("two_class_grid"))
    curve = Table("popt_two_class", ["c1", "p1_opt", "ratio"], plot=("c1", "ratio"))
    s = float(cfg.param("rho")) / 2.0
    for k in range(1, grid + 1):
        c1 = k / (grid + 1)
        inst = ProblemInstance((ClassSpec(1.0, ServiceDistribution(cfg.service, s), c1),
                                ClassSpec(1.0, ServiceDistribution(cfg.service, s), 1.0 - c1)),
                               1, cfg.v, _env(cfg))
        res = optimize_p_two_class(inst)
        curve.rows.append([c1, float(res.p_opt[0]), res.ratio])
    return [table, curve]


# ---------------------------------------------------------------- Merge vs SQ

def merge_instance(lambda2: float, lambda1: float = 1.0, c1: float = 0.995, rho: float = 0.9,
                   n: int = 1, v: float = 1.0, env: Environment | None = None,
                   kind: str = "exponential") -> ProblemInstance:
    """Two classes with a common service mean chosen to hit load ``rho``."""
    s = rho * n / (lambda1 + lambda2)
    return ProblemInstance((ClassSpec(lambda1, ServiceDistribution(kind, s), c1),
                            ClassSpec(lambda2, ServiceDistribution(kind, s), 1.0 - c1)),
                           n, v, env or Environment())


def _merge_instance(cfg: ExperimentConfig, lambda2: float) -> ProblemInstance:
    return merge_instance(lambda2, float(cfg.param("lambda1")), float(cfg.param("c1")),
                          float(cfg.param("rho")), int(cfg.param("n")), cfg.v, _env(cfg), cfg.service)


def _merge_task(args):
    cfg, k, lambda2, r = args
    inst = _merge_instance(cfg, lambda2)
    seed = seed_for(cfg.seed, 4, k, r)  # common random numbers for both policies
    sq = run_simulation(inst, RunConfig(cfg.iterations, cfg.window, seed, policy="sq"))
    mg = run_simulation(inst, RunConfig(cfg.iterations, cfg.window, seed, policy="merge"))
    d_sq, d_mg = empirical_cost(sq, inst.weights), empirical_cost(mg, inst.weights)
    return k, r, d_mg / d_sq, d_sq, d_mg, sq.unstable or mg.unstable


def exp_merge(cfg: ExperimentConfig) -> list[Table]:
    sweep = [float(x) for x in cfg.param("lambda2")]
    tasks = [(cfg, k, l2, r) for k, l2 in enumerate(sweep) for r in range(cfg.runs)]
    results = _map(cfg, _merge_task, tasks)
    table = Table("merge", ["lambda2", "mean_ratio", "std_ratio", "mean_cost_sq", "mean_cost_merge",
                            "bound_ratio", "runs_used", "unstable"], plot=("lambda2", "mean_ratio"))
    for k, l2 in enumerate(sweep):
        inst = _merge_instance(cfg, l2)
        mine = [x for x in results if x[0] == k]
        good = [x for x in mine if not x[5]]
        mean, sd, _, _ = _summary([x[2] for x in good])
        table.rows.append([l2, mean, sd, float(np.mean([x[3] for x in good])) if good else math.nan,
                           float(np.mean([x[4] for x in good])) if good else math.nan,
                           merge_upper_bound(inst) / sq_upper_bound(inst), len(good), len(mine) - len(good)])
    trend = Table("merge_trend", ["quantity", "value"])
    if len(sweep) >= 2:
        rho_s = spearmanr(table.column("lambda2"), table.column("mean_ratio")).statistic
        trend.rows.append(["spearman_ratio_vs_lambda2", float(rho_s)])
    return [table, trend]


# ---------------------------------------------------------------- single instance / beta

def config_instance(cfg: ExperimentConfig) -> ProblemInstance:
    classes = tuple(ClassSpec(b.rate, ServiceDistribution(cfg.service, b.mean), b.weight)
                    for b in cfg.classes)
    return ProblemInstance(classes, cfg.n, cfg.v, _env(cfg))


def exp_bounds_report(cfg: ExperimentConfig) -> list[Table]:
    from .model import validate_instance

    inst = config_instance(cfg)
    problems = validate_instance(inst)
    if problems:
        raise ValueError("invalid instance: " + "; ".join(problems))
    row = bound_report(inst).row()
    row = {"m": inst.m, "rho": load_factor(inst), **row}
    row["factor_limit"] = 2 * inst.m ** 2
    row["factor_check"] = factor_ratio(inst)
    return [Table("bounds_report", list(row), [list(row.values())])]


def exp_beta(cfg: ExperimentConfig) -> list[Table]:
    table = Table("beta_estimate", ["N", "trials", "mean_beta", "std_beta"], plot=("N", "mean_beta"))
    for N in (int(x) for x in cfg.param("sizes")):
        x = beta_samples(N, cfg.runs, rng_for(cfg.seed, 6, N))
        table.rows.append([N, cfg.runs, float(x.mean()), float(x.std(ddof=1)) if len(x) > 1 else 0.0])
    return [table]


EXPERIMENT_FUNCS = {
    "tightness": exp_tightness,
    "worstcase": exp_worstcase,
    "popt": exp_popt,
    "merge": exp_merge,
    "bounds-report": exp_bounds_report,
    "beta-estimate": exp_beta,
}


# ---------------------------------------------------------------- output

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def provenance_header(cfg: ExperimentConfig, table: Table) -> list[str]:
    return [
        f"# table: {table.name}",
        f"# experiment: {cfg.experiment}",
        f"# config_hash: {cfg.digest()}",
        f"# seed: {cfg.seed}",
        f"# runs: {cfg.runs}",
        f"# iterations: {cfg.iterations}",
        f"# window: {cfg.window}",
        f"# service: {cfg.service}",
    ]


def render_csv(cfg: ExperimentConfig, table: Table) -> str:
    buf = io.StringIO()
    for line in provenance_header(cfg, table):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def render_dat(cfg: ExperimentConfig, table: Table) -> str:
    xc, yc = table.plot
    lines = provenance_header(cfg, table) + [f"# {xc} {yc}"]
    lines += [f"{_fmt(x)} {_fmt(y)}" for x, y in zip(table.column(xc), table.column(yc))]
    return "\n".join(lines) + "\n"


def write_tables(cfg: ExperimentConfig, tables: list[Table], out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in tables:
        p = out_dir / f"{t.name}.csv"
        p.write_text(render_csv(cfg, t))
        paths.append(p)
        if t.plot is not None:
            d = out_dir / f"{t.name}.dat"
            d.write_text(render_dat(cfg, t))
            paths.append(d)
    return paths


def run_experiment(cfg: ExperimentConfig) -> tuple[list[Table], list[Path]]:
    """Run ``cfg`` and write its tables, plot data and ``manifest.json`` into ``cfg.out_dir``."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    tables = EXPERIMENT_FUNCS[cfg.experiment](cfg)
    elapsed = time.perf_counter() - t0
    paths = write_tables(cfg, tables, out_dir)
    manifest = {
        "experiment": cfg.experiment,
        "config_hash": cfg.digest(),
        "config": json.loads(cfg.canonical()),
        "seed": cfg.seed,
        "files": sorted(p.name for p in paths),
        "elapsed_seconds": round(elapsed, 3),
        "versions": {"sqroute": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__, "kernels": BACKEND},
    }
    mpath = out_dir / f"manifest_{cfg.experiment}.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return tables, paths + [mpath]
