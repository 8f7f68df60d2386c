"""Experiment configuration files (INI sections of ``key = value``).

A config names a data source, a network, a solver and a schedule. Loading
resolves it into concrete objects; :func:`resolved_text` writes back a
config whose schedule is fully explicit, so a rerun from it reproduces the
original run exactly.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .baselines import BaselineConfig
from .core import RunConfig
from .dataio import Dataset, load_libsvm, make_synthetic, normalize, partition, train_test_split
from .errors import ParameterError
from .objectives import ObjectiveSuite, l1_norm_objective, noisy_quadratic, svm_suite
from .schedules import ProblemConstants, Schedule, make_schedule
from .topology import CommMatrix, erdos_renyi_matrix, load_matrix, ring_matrix, uniform_matrix

__all__ = ["ExperimentConfig", "Experiment", "load_config", "parse_config", "build", "resolved_text",
           "preset_names", "preset_text"]

SOLVERS = ("medol", "dpsgd", "dgfm")
SOURCES = ("synthetic", "libsvm", "quadratic", "abs")
TOPOLOGIES = ("ring", "erdos", "uniform", "file")
SCHEDULE_MODES = ("manual", "theory", "experiment")


def _f(v: float) -> str:
    return f"{v:.17g}"


@dataclass
class ExperimentConfig:
    sections: dict
    base_dir: Path = field(default_factory=Path.cwd)

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str) -> str:
        v = self.get(section, key)
        if v is None or v == "":
            raise ParameterError(f"missing required key [{section}] {key}")
        return v

    def num(self, section: str, key: str, default=None, kind=float):
        v = self.get(section, key)
        if v is None or v == "":
            return default
        try:
            return kind(v)
        except ValueError:
            raise ParameterError(f"[{section}] {key} = {v!r} is not a valid {kind.__name__}") from None

    @property
    def solver(self) -> str:
        return self.get("experiment", "solver", "medol")

    @property
    def oracle(self) -> str:
        if self.solver == "dpsgd":
            return "first"
        if self.solver == "dgfm":
            return "zero"
        return self.get("experiment", "oracle", "first")

    @property
    def n(self) -> int:
        return self.num("network", "n", kind=int)

    @property
    def seed(self) -> int:
        return self.num("experiment", "seed", 0, int)


def parse_config(text: str, base_dir=None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ParameterError(f"malformed config: {exc}") from None
    sections = {s: dict(cp[s]) for s in cp.sections()}
    cfg = ExperimentConfig(sections, Path(base_dir) if base_dir else Path.cwd())
    _validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, base_dir=path.parent)


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.solver not in SOLVERS:
        raise ParameterError(f"[experiment] solver must be one of {SOLVERS}, got {cfg.solver!r}")
    if cfg.oracle not in ("first", "zero"):
        raise ParameterError(f"[experiment] oracle must be 'first' or 'zero', got {cfg.oracle!r}")
    source = cfg.get("data", "source", "synthetic")
    if source not in SOURCES:
        raise ParameterError(f"[data] source must be one of {SOURCES}, got {source!r}")
    if source == "libsvm":
        p = cfg.base_dir / cfg.require("data", "path")
        if not p.exists():
            raise ParameterError(f"dataset file {p} does not exist")
    topo = cfg.get("network", "topology", "ring")
    if topo not in TOPOLOGIES:
        raise ParameterError(f"[network] topology must be one of {TOPOLOGIES}, got {topo!r}")
    if topo == "file":
        p = cfg.base_dir / cfg.require("network", "path")
        if not p.exists():
            raise ParameterError(f"matrix file {p} does not exist")
    elif cfg.n is None or cfg.n < 1:
        raise ParameterError("[network] n must be a positive integer")
    n_exp = cfg.num("experiment", "n", None, int)
    if n_exp is not None and cfg.n is not None and n_exp != cfg.n:
        raise ParameterError(f"[experiment] n={n_exp} does not match [network] n={cfg.n}")
    if topo == "ring":
        m = cfg.num("network", "m", None, int)
        if m is None or m % 2 == 0 or m < 1 or m > cfg.n:
            raise ParameterError(f"[network] m must be odd and in [1, n], got {m}")
    if cfg.solver == "medol":
        mode = cfg.get("schedule", "mode", "manual")
        if mode not in SCHEDULE_MODES:
            raise ParameterError(f"[schedule] mode must be one of {SCHEDULE_MODES}, got {mode!r}")
        if mode == "manual":
            for key in ("K", "T", "D", "eta"):
                cfg.require("schedule", key.lower())
        else:
            cfg.require("schedule", "delta")
            cfg.require("schedule", "rounds")
    else:
        cfg.require("baseline", "rounds")
        cfg.require("baseline", "step_size")
    te = cfg.num("experiment", "trace_every", 1, int)
    if te < 1:
        raise ParameterError("[experiment] trace_every must be >= 1")


@dataclass
class Experiment:
    config: ExperimentConfig
    suite: ObjectiveSuite
    M: CommMatrix
    test_set: Dataset | None
    run_config: RunConfig | None = None
    baseline_config: BaselineConfig | None = None
    schedule: Schedule | None = None


def _build_data(cfg: ExperimentConfig, n: int):
    source = cfg.get("data", "source", "synthetic")
    seed = cfg.num("data", "data_seed", 0, int)
    if source in ("synthetic", "libsvm"):
        if source == "synthetic":
            ds = make_synthetic(
                cfg.num("data", "samples", 2000, int),
                cfg.num("data", "dim", 22, int),
                seed,
                separation=cfg.num("data", "separation", 4.0),
                label_noise=cfg.num("data", "label_noise", 0.05),
                density=cfg.num("data", "density", 1.0),
            )
        else:
            ds = load_libsvm(cfg.base_dir / cfg.require("data", "path"))
            if cfg.get("data", "normalize", "true").lower() in ("1", "true", "yes"):
                ds = normalize(ds)
        frac = cfg.num("data", "test_fraction", 0.0)
        test = None
        if frac > 0:
            ds, test = train_test_split(ds, frac, seed)
        part = partition(ds, n, seed)
        lam = cfg.get("data", "lambda", "auto")
        lam = None if lam == "auto" else float(lam)
        return svm_suite(ds, part, lam=lam, alpha=cfg.num("data", "alpha", 2.0)), test
    dim = cfg.num("data", "dim", 5, int)
    if source == "quadratic":
        rng = np.random.default_rng(seed)
        spread = cfg.num("data", "spread", 1.0)
        sigma = cfg.num("data", "sigma", 0.0)
        centers = spread * rng.standard_normal((n, dim))
        return ObjectiveSuite.of(noisy_quadratic(dim, centers[i], sigma, seed * 1000 + i) for i in range(n)), None
    scale = cfg.num("data", "scale", 1.0)
    return ObjectiveSuite.of(l1_norm_objective(dim, scale) for _ in range(n)), None


def _build_network(cfg: ExperimentConfig) -> CommMatrix:
    topo = cfg.get("network", "topology", "ring")
    if topo == "ring":
        return ring_matrix(cfg.n, cfg.num("network", "m", kind=int))
    if topo == "erdos":
        return erdos_renyi_matrix(cfg.n, cfg.num("network", "p", 0.5), cfg.num("network", "seed", 0, int))
    if topo == "uniform":
        return uniform_matrix(cfg.n)
    return load_matrix(cfg.base_dir / cfg.require("network", "path"))


def _build_schedule(cfg: ExperimentConfig, suite: ObjectiveSuite, M: CommMatrix):
    mode = cfg.get("schedule", "mode", "manual")
    oracle = cfg.oracle
    if mode == "manual":
        return None, dict(
            K=cfg.num("schedule", "k", kind=int), T=cfg.num("schedule", "t", kind=int),
            D=cfg.num("schedule", "d"), eta=cfg.num("schedule", "eta"),
            delta_prime=cfg.num("schedule", "delta_prime", 0.0),
        )
    smooth = cfg.get("schedule", "smooth", "false").lower() in ("1", "true", "yes")
    sched_mode = "smooth" if smooth else ("nonsmooth_zero" if oracle == "zero" else "nonsmooth_first")
    L = cfg.num("schedule", "l", suite.lipschitz if math.isfinite(suite.lipschitz) else 1.0)
    pc = ProblemConstants(
        L=L, G=cfg.num("schedule", "g", L), sigma=cfg.num("schedule", "sigma", L),
        gamma=cfg.num("schedule", "gamma", 1.0), n=M.n, d=suite.dim, rho=M.rho,
        L1=cfg.num("schedule", "l1", None),
    )
    sched = make_schedule(
        cfg.num("schedule", "delta"), cfg.num("schedule", "rounds", kind=int), pc, sched_mode,
        c_T=cfg.num("schedule", "c_t", None), T=cfg.num("schedule", "t", None, int),
        eta_mode="theory" if mode == "theory" else "experiment",
    )
    return sched, dict(K=sched.K, T=sched.T, D=sched.D, eta=sched.eta, delta_prime=sched.delta_prime)


def build(cfg: ExperimentConfig) -> Experiment:
    M = _build_network(cfg)
    suite, test = _build_data(cfg, M.n)
    x0 = cfg.get("experiment", "x0")
    x0 = tuple(float(v) for v in x0.split(",")) if x0 else None
    trace_every = cfg.num("experiment", "trace_every", 1, int)
    batch = cfg.num("experiment", "batch_size", 1, int)
    proxy = cfg.num("eval", "proxy_samples", 0, int)
    delta = cfg.num("eval", "delta", None)
    exp = Experiment(cfg, suite, M, test)
    if cfg.solver == "medol":
        sched, params = _build_schedule(cfg, suite, M)
        exp.schedule = sched
        if delta is None and sched is not None:
            delta = sched.delta
        exp.run_config = RunConfig(
            oracle=cfg.oracle, seed=cfg.seed, n=M.n, d=suite.dim, trace_every=trace_every,
            batch_size=batch, x0=x0, delta=delta, proxy_samples=proxy,
            provenance=cfg.get("schedule", "mode", "manual"), **params,
        )
        exp.run_config.validate()
    else:
        exp.baseline_config = BaselineConfig(
            rounds=cfg.num("baseline", "rounds", kind=int),
            step_size=cfg.num("baseline", "step_size"),
            delta_prime=cfg.num("baseline", "delta_prime", 0.0),
            seed=cfg.seed, trace_every=trace_every,
            eval_every=cfg.num("baseline", "eval_every", None, int),
            batch_size=batch, x0=x0, proxy_samples=proxy, delta=delta,
        )
        exp.baseline_config.validate(cfg.solver == "dgfm")
    return exp


def resolved_text(exp: Experiment) -> str:
    """Config text with every schedule value explicit (17 significant digits)."""
    sections = {s: dict(v) for s, v in exp.config.sections.items()}
    for sec in ("data", "network"):
        for key in ("path",):
            if key in sections.get(sec, {}):
                sections[sec][key] = str((exp.config.base_dir / sections[sec][key]).resolve())
    if exp.run_config is not None:
        rc = exp.run_config
        prov = {"schedule_mode": rc.provenance}
        if exp.schedule is not None:
            prov.update({f"schedule_{k}": (_f(v) if isinstance(v, float) else str(v))
                         for k, v in exp.schedule.to_dict().items()})
        sections["schedule"] = {
            "mode": "manual", "k": str(rc.K), "t": str(rc.T), "d": _f(rc.D),
            "eta": _f(rc.eta), "delta_prime": _f(rc.delta_prime),
        }
        if rc.delta is not None:
            sections.setdefault("eval", {})["delta"] = _f(rc.delta)
        sections["provenance"] = prov
    sections.setdefault("network", {})["rho"] = _f(exp.M.rho)
    cp = configparser.ConfigParser(interpolation=None)
    for s, kv in sections.items():
        cp[s] = kv
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def preset_names() -> list[str]:
    root = resources.files("medol") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def preset_text(name: str) -> str:
    path = resources.files("medol") / "presets" / f"{name}.ini"
    if not path.is_file():
        raise ParameterError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return path.read_text()
