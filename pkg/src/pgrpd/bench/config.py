"""Benchmark configuration files.

The format is plain text with ``key = value`` lines grouped in sections::

    # one instance section; comma lists in d/kappa/rho expand to a grid
    [instance]
    gen = qp                 # qp | hard | file
    d = 100
    kappa = 2, 10000
    rho = 1
    exact_kappa = false

    # one section per solver; other keys are passed to the solver config
    [solver]
    name = pgrpd             # pgrpd | admm | palm
    label = pgrpd            # optional, used in file names

    [solver]
    name = admm

    [run]
    seeds = 0, 1, 2
    eps = 1e-3
    max_grads = 2000000
    out = results
    plot = true
    parallelism = 4

``[solver]`` may repeat; ``[instance]`` and ``[run]`` may not. For
``gen = file`` give ``path`` (relative paths resolve against the config
file). For ``gen = hard`` the keys are ``m1, m2, dbar, lf, beta, rho_f``.
"""

from __future__ import annotations

import dataclasses
import itertools
import os
from dataclasses import dataclass

from ..baselines import AdmmConfig, PalmConfig
from ..model import ConfigurationError
from ..solver import PgRpdConfig

__all__ = ["InstanceSpec", "SolverSpec", "BenchConfig", "parse_config", "load_config",
           "SOLVERS"]

SOLVERS = {"pgrpd": PgRpdConfig, "admm": AdmmConfig, "palm": PalmConfig}
_SECTIONS = ("instance", "solver", "run")


def _value(text):
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null", ""):
        return None
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    return t


def _list(text):
    return [_value(p) for p in str(text).split(",") if p.strip()]


@dataclass(frozen=True)
class InstanceSpec:
    """One concrete instance: generator name plus its parameters."""

    gen: str
    params: tuple

    @property
    def kwargs(self):
        return dict(self.params)

    @property
    def ident(self):
        kw = self.kwargs
        if self.gen == "qp":
            return f"qp_d{kw['d']}_k{kw['kappa']:g}_r{kw['rho']:g}"
        if self.gen == "hard":
            return f"hard_{kw['m1']}_{kw['m2']}_{kw['dbar']}"
        return "file_" + os.path.splitext(os.path.basename(kw["path"]))[0]


@dataclass(frozen=True)
class SolverSpec:
    name: str
    label: str
    options: tuple = ()

    def make_config(self, eps, max_grads):
        cls = SOLVERS[self.name]
        opts = dict(self.options)
        opts.setdefault("eps", eps)
        opts.setdefault("max_grads", max_grads)
        return cls(**opts)


@dataclass
class BenchConfig:
    instances: list
    solvers: list
    seeds: list
    eps: float = 1e-3
    max_grads: int = 2_000_000
    out: str = "bench_out"
    plot: bool = False
    parallelism: int = 1

    def __post_init__(self):
        if not self.solvers:
            raise ConfigurationError("at least one [solver] section is required")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        if not self.instances:
            raise ConfigurationError("an [instance] section is required")
        if self.parallelism < 1:
            raise ConfigurationError("parallelism must be at least 1")
        labels = [s.label for s in self.solvers]
        if len(set(labels)) != len(labels):
            raise ConfigurationError("solver labels must be unique")


def _sections(text):
    out = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in _SECTIONS:
                raise ConfigurationError(f"line {lineno}: unknown section [{name}]")
            current = (name, {})
            out.append(current)
            continue
        if current is None:
            raise ConfigurationError(f"line {lineno}: key outside of a section")
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in current[1]:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        current[1][key] = val
    return out


_QP_KEYS = {"d": 100, "kappa": 10.0, "rho": 0.1, "exact_kappa": True, "beta": 1.0}
_HARD_KEYS = {"m1": 2, "m2": 3, "dbar": 5, "lf": 1.0, "beta": 1.0, "rho_f": 0.1}


def _instances(sec, base_dir):
    sec = dict(sec)
    gen = sec.pop("gen", "qp").strip().lower()
    if gen == "file":
        if "path" not in sec:
            raise ConfigurationError("gen = file needs a path")
        path = sec.pop("path")
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        params = [("path", path)]
        if "lf" in sec:
            params.append(("lf", float(_value(sec.pop("lf")))))
        if sec:
            raise ConfigurationError(f"unknown instance keys: {sorted(sec)}")
        return [InstanceSpec("file", tuple(params))]
    if gen not in ("qp", "hard"):
        raise ConfigurationError(f"unknown generator {gen!r}")
    defaults = _QP_KEYS if gen == "qp" else _HARD_KEYS
    unknown = set(sec) - set(defaults)
    if unknown:
        raise ConfigurationError(f"unknown instance keys: {sorted(unknown)}")
    grids = []
    for key, default in defaults.items():
        vals = _list(sec[key]) if key in sec else [default]
        if not vals:
            raise ConfigurationError(f"empty value for {key}")
        grids.append([(key, v) for v in vals])
    return [InstanceSpec(gen, tuple(combo)) for combo in itertools.product(*grids)]


def _solver(sec):
    sec = dict(sec)
    name = sec.pop("name", "").strip().lower()
    if name not in SOLVERS:
        raise ConfigurationError(f"solver name must be one of {sorted(SOLVERS)}")
    label = sec.pop("label", name).strip()
    known = {f.name for f in dataclasses.fields(SOLVERS[name])}
    unknown = set(sec) - known
    if unknown:
        raise ConfigurationError(f"unknown {name} options: {sorted(unknown)}")
    opts = tuple(sorted((k, _value(v)) for k, v in sec.items()))
    spec = SolverSpec(name, label, opts)
    try:
        spec.make_config(1e-3, 1)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
    return spec


def parse_config(text, base_dir="."):
    instances, solvers, run = None, [], None
    for name, sec in _sections(text):
        if name == "instance":
            if instances is not None:
                raise ConfigurationError("only one [instance] section is allowed")
            instances = _instances(sec, base_dir)
        elif name == "solver":
            solvers.append(_solver(sec))
        else:
            if run is not None:
                raise ConfigurationError("only one [run] section is allowed")
            run = sec
    run = dict(run or {})
    kw = {}
    try:
        if "seeds" in run:
            kw["seeds"] = [int(s) for s in _list(run.pop("seeds"))]
        for key, conv in (("eps", float), ("max_grads", int), ("parallelism", int)):
            if key in run:
                kw[key] = conv(_value(run.pop(key)))
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad [run] value: {exc}") from exc
    if "out" in run:
        out = run.pop("out")
        kw["out"] = out if os.path.isabs(out) else os.path.join(base_dir, out)
    if "plot" in run:
        kw["plot"] = bool(_value(run.pop("plot")))
    if run:
        raise ConfigurationError(f"unknown [run] keys: {sorted(run)}")
    kw.setdefault("seeds", [0])
    return BenchConfig(instances=instances or [], solvers=solvers, **kw)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))
