"""Experiment configuration files (TOML) and their validation.

Example::

    schema_version = 1
    experiment = "tightness"
    seed = 7
    runs = 20
    iterations = 2000
    window = 500

    [params]
    m = 4
    rhos = [0.75, 0.9]

``bounds-report`` takes explicit classes instead::

    [instance]
    n = 1
    v = 1.0

    [[classes]]
    rate = 1.0
    mean = 0.3
    weight = 0.6
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
EXPERIMENTS = ("tightness", "worstcase", "popt", "merge", "bounds-report", "beta-estimate")
SERVICE_KINDS = ("exponential", "deterministic", "uniform")

# run counts and lengths: desk scale, then the published protocol
DESK = {
    "tightness": dict(runs=20, iterations=2000, window=500),
    "worstcase": dict(runs=10, iterations=2000, window=500),
    "popt": dict(runs=200, iterations=0, window=0),
    "merge": dict(runs=10, iterations=1000, window=250),
    "bounds-report": dict(runs=1, iterations=0, window=0),
    "beta-estimate": dict(runs=20, iterations=0, window=0),
}
PAPER = {
    "tightness": dict(runs=100, iterations=4000, window=1000),
    "worstcase": dict(runs=10, iterations=4000, window=1000),
    "popt": dict(runs=1000, iterations=0, window=0),
    "merge": dict(runs=10, iterations=4000, window=1000),
    "bounds-report": dict(runs=1, iterations=0, window=0),
    "beta-estimate": dict(runs=200, iterations=0, window=0),
}

DEFAULT_PARAMS = {
    "tightness": dict(m=4, n=1, rhos=[0.75, 0.8, 0.85, 0.9, 0.95]),
    "worstcase": dict(ms=[2, 3, 4, 5, 6], a=2.0, rho=0.85, lambda1=1.0, n=1),
    "popt": dict(ms=[3, 4, 5, 6, 7, 8], starts=5, two_class_grid=99, rho=0.9),
    "merge": dict(lambda2=[0.25, 0.5, 1.0, 2.0, 4.0], lambda1=1.0, c1=0.995, rho=0.9, n=1),
    "bounds-report": dict(),
    "beta-estimate": dict(sizes=[100, 1000]),
}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ClassBlock:
    rate: float
    mean: float
    weight: float


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 0
    runs: int = 1
    iterations: int = 0
    window: int = 0
    workers: int = 1
    service: str = "exponential"
    out_dir: str = "out"
    params: dict = field(default_factory=dict)
    n: int = 1
    v: float = 1.0
    width: float = 1.0
    height: float = 1.0
    classes: tuple[ClassBlock, ...] = ()

    def canonical(self) -> str:
        d = asdict(self)
        d.pop("out_dir")
        d.pop("workers")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        """Hash of everything that determines the results (not out_dir/workers)."""
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def param(self, key):
        return self.params.get(key, DEFAULT_PARAMS[self.experiment].get(key))


def _need(d: dict, key: str, types, where: str = ""):
    name = f"{where}{key}"
    if key not in d:
        raise ConfigError(name, "missing required field")
    val = d[key]
    if isinstance(val, bool) or not isinstance(val, types):
        raise ConfigError(name, f"expected {_tname(types)}, got {type(val).__name__}")
    return val


def _opt(d: dict, key: str, types, default, where: str = ""):
    if key not in d:
        return default
    return _need(d, key, types, where)


def _tname(types) -> str:
    if isinstance(types, tuple):
        return " or ".join(t.__name__ for t in types)
    return types.__name__


def _check_params(exp: str, params: dict):
    known = DEFAULT_PARAMS[exp]
    for key, val in params.items():
        if key not in known:
            raise ConfigError(f"params.{key}", f"unknown parameter for {exp!r}")
        ref = known[key]
        if isinstance(ref, list):
            if not isinstance(val, list) or not val:
                raise ConfigError(f"params.{key}", "expected a nonempty list")
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in val):
                raise ConfigError(f"params.{key}", "expected a list of numbers")
        elif isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"params.{key}", "expected a number")
    for key in ("rhos",):
        for x in params.get(key, []):
            if not 0 < x < 1:
                raise ConfigError(f"params.{key}", f"load factor {x} outside (0, 1)")
    if "rho" in params and not 0 < params["rho"] < 1:
        raise ConfigError("params.rho", "load factor outside (0, 1)")


def from_dict(raw: dict, experiment: str | None = None) -> ExperimentConfig:
    """Validate a parsed TOML document; ``experiment`` overrides the file's choice."""
    version = _need(raw, "schema_version", int)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version} (expected {SCHEMA_VERSION})")
    exp = experiment or _need(raw, "experiment", str)
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}")
    known_top = {"schema_version", "experiment", "seed", "runs", "iterations", "window", "workers",
                 "service", "out_dir", "params", "instance", "classes"}
    for key in raw:
        if key not in known_top:
            raise ConfigError(key, "unknown field")
    base = DESK[exp]
    seed = _opt(raw, "seed", int, 0)
    runs = _opt(raw, "runs", int, base["runs"])
    iterations = _opt(raw, "iterations", int, base["iterations"])
    window = _opt(raw, "window", int, base["window"] if "iterations" not in raw else max(1, iterations // 4))
    workers = _opt(raw, "workers", int, 1)
    service = _opt(raw, "service", str, "exponential")
    out_dir = _opt(raw, "out_dir", str, "out")
    params = _opt(raw, "params", dict, {})
    _check_params(exp, params)
    inst = _opt(raw, "instance", dict, {})
    for key in inst:
        if key not in ("n", "v", "width", "height"):
            raise ConfigError(f"instance.{key}", "unknown field")
    n = _opt(inst, "n", int, 1, "instance.")
    v = float(_opt(inst, "v", (int, float), 1.0, "instance."))
    width = float(_opt(inst, "width", (int, float), 1.0, "instance."))
    height = float(_opt(inst, "height", (int, float), 1.0, "instance."))
    classes = []
    for k, blk in enumerate(_opt(raw, "classes", list, [])):
        where = f"classes[{k}]."
        if not isinstance(blk, dict):
            raise ConfigError(f"classes[{k}]", "expected a table")
        classes.append(ClassBlock(*(float(_need(blk, f, (int, float), where)) for f in ("rate", "mean", "weight"))))
    if exp == "bounds-report" and not classes:
        raise ConfigError("classes", "missing required field (bounds-report needs at least one class)")
    cfg = ExperimentConfig(exp, seed, runs, iterations, window, workers, service, out_dir, params,
                           n, v, width, height, tuple(classes))
    return validate(cfg)


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.runs < 1:
        raise ConfigError("runs", "must be at least 1")
    if cfg.workers < 1:
        raise ConfigError("workers", "must be at least 1")
    if cfg.service not in SERVICE_KINDS:
        raise ConfigError("service", f"unknown distribution {cfg.service!r}")
    if cfg.experiment in ("tightness", "worstcase", "merge"):
        if cfg.iterations < 1:
            raise ConfigError("iterations", "must be at least 1")
        if not 0 < cfg.window <= cfg.iterations:
            raise ConfigError("window", "need 0 < window <= iterations")
    if cfg.n < 1:
        raise ConfigError("instance.n", "fleet size must be at least 1")
    if not (cfg.v > 0 and cfg.width > 0 and cfg.height > 0):
        raise ConfigError("instance", "v, width and height must be positive")
    return cfg


def load_config(path, experiment: str | None = None) -> ExperimentConfig:
    """Parse and validate a TOML config; syntax errors carry line/column."""
    text = Path(path).read_text()
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<syntax>", str(exc)) from None
    return from_dict(raw, experiment)


def default_config(experiment: str) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {experiment!r}")
    return from_dict({"schema_version": SCHEMA_VERSION, "experiment": experiment})


def apply_overrides(cfg: ExperimentConfig, *, seed=None, runs=None, iterations=None, out_dir=None,
                    paper_scale: bool = False, scale: float | None = None,
                    workers=None) -> ExperimentConfig:
    """Command-line overrides; ``scale`` multiplies runs and iterations (window keeps its share)."""
    if paper_scale:
        cfg = replace(cfg, **PAPER[cfg.experiment])
    if scale is not None:
        if not scale > 0:
            raise ConfigError("--scale", "must be positive")
        frac = cfg.window / cfg.iterations if cfg.iterations else 0
        its = max(1, round(cfg.iterations * scale)) if cfg.iterations else 0
        cfg = replace(cfg, runs=max(1, round(cfg.runs * scale)), iterations=its,
                      window=max(1, round(its * frac)) if its else 0)
    if iterations is not None:
        frac = cfg.window / cfg.iterations if cfg.iterations else 0.25
        cfg = replace(cfg, iterations=iterations, window=max(1, round(iterations * frac)))
    if runs is not None:
        cfg = replace(cfg, runs=runs)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if out_dir is not None:
        cfg = replace(cfg, out_dir=str(out_dir))
    if workers is not None:
        cfg = replace(cfg, workers=workers)
    return validate(cfg)
