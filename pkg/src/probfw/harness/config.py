"""Strict experiment configuration files.

A config is an INI-style text file::

    [instance]
    name = calibration
    y0 = 0.3

    [solver]
    variant = dfw
    max_iters = 1000

    [experiment]
    replications = 1
    checks = bound_dfw

Values are Python literals (``0.3``, ``[0.25, 0.75]``, ``True``); anything
that does not parse as a literal is kept as a string. Unknown sections and
keys are errors, since a silent typo would change what a check measures.
Optional ``[subsolver]`` and ``[inner]`` sections set the subproblem and
fully-corrective settings.
"""
import ast
import configparser
import inspect
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from ..instances import BUILDERS, build
from ..measure import AtomicMeasure, dirac
from ..solvers import FCConfig, SolverConfig
from ..subsolver import SubsolverConfig

CHECKS = ("bound_dfw", "bound_sfw", "bound_fixed", "gap_nonconvex", "clt", "oracle_audit", "invariants")
STATISTICAL = ("bound_sfw", "gap_nonconvex", "clt")
MIN_REPLICATIONS = 30

_SOLVER_KEYS = tuple(f.name for f in fields(SolverConfig) if f.name not in ("inner", "sub", "replication"))
_SUB_KEYS = tuple(f.name for f in fields(SubsolverConfig))
_INNER_KEYS = tuple(f.name for f in fields(FCConfig))
_EXPERIMENT_KEYS = {
    "replications": 1,
    "checks": (),
    "output": "results",
    "mu0_atoms": None,
    "mu0_weights": None,
    "ks": (8, 32, 128),
    "n_list": (4096,),
    "t_list": (16, 23, 32, 45, 64, 91, 128, 181, 256),
    "check_t": (64, 256),
    "time_limit": None,
    "audit_trials": 20,
}
_SECTIONS = ("instance", "solver", "subsolver", "inner", "experiment")


class ConfigError(ValueError):
    """The configuration file is malformed or inconsistent."""


def _literal(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text.strip()


def _as_tuple(v):
    if isinstance(v, (list, tuple)):
        return tuple(v)
    if isinstance(v, str):
        return tuple(s.strip() for s in v.split(",") if s.strip())
    return (v,)


@dataclass
class ExperimentConfig:
    instance: str
    instance_params: dict
    solver: SolverConfig
    replications: int = 1
    checks: tuple = ()
    output: str = "results"
    mu0_atoms: Optional[list] = None
    mu0_weights: Optional[list] = None
    options: dict = field(default_factory=dict)

    def build_instance(self):
        try:
            return build(self.instance, **dict(self.instance_params))
        except (TypeError, ValueError) as err:
            raise ConfigError(f"invalid parameters for instance {self.instance!r}: {err}") from None

    def build_mu0(self, inst):
        """Starting measure; a Dirac at the box center unless configured."""
        if self.mu0_atoms is None:
            return dirac(inst.domain.center, inst.domain)
        try:
            atoms = np.asarray(self.mu0_atoms, dtype=np.float64).reshape(-1, inst.domain.dim)
            n = atoms.shape[0]
            w = self.mu0_weights if self.mu0_weights is not None else np.full(n, 1.0 / n)
            return AtomicMeasure(atoms, w, inst.domain)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"invalid mu0: {err}") from None

    def seeds(self):
        """Published seed list: ``seed, seed + 1, ...`` for each replication."""
        return [self.solver.seed + r for r in range(self.replications)]

    def with_overrides(self, seed=None, replications=None, timing=None):
        cfg = self
        if seed is not None:
            cfg = replace(cfg, solver=replace(cfg.solver, seed=int(seed)))
        if replications is not None:
            cfg = replace(cfg, replications=int(replications))
        if timing is not None:
            cfg = replace(cfg, solver=replace(cfg.solver, timing=bool(timing)))
        cfg.validate()
        return cfg

    def validate(self):
        if self.replications < 1:
            raise ConfigError("replications must be positive")
        bad = [c for c in self.checks if c not in CHECKS]
        if bad:
            raise ConfigError(f"unknown checks {bad}; choose from {list(CHECKS)}")
        stat = [c for c in self.checks if c in STATISTICAL]
        if stat and self.replications < MIN_REPLICATIONS:
            raise ConfigError(
                f"checks {stat} are statistical and need replications >= {MIN_REPLICATIONS}, got {self.replications}"
            )


def _section(cp, name, allowed):
    if not cp.has_section(name):
        return {}
    out = {}
    for key, raw in cp.items(name):
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{name}]; allowed: {sorted(allowed)}")
        out[key] = _literal(raw)
    return out


def parse_config(text):
    """Parse config text into an :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError
        On syntax errors, unknown sections or keys, bad values, or
        statistical checks with fewer than 30 replications.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"cannot parse config: {err}") from None
    extra = [s for s in cp.sections() if s not in _SECTIONS]
    if extra:
        raise ConfigError(f"unknown sections {extra}; allowed: {list(_SECTIONS)}")
    if not cp.has_section("instance") or not cp.has_option("instance", "name"):
        raise ConfigError("[instance] needs a name")
    name = cp.get("instance", "name").strip()
    if name not in BUILDERS:
        raise ConfigError(f"unknown instance {name!r}; choose from {sorted(BUILDERS)}")
    allowed = set(inspect.signature(BUILDERS[name]).parameters) | {"name", "zero_variance"}
    params = _section(cp, "instance", allowed)
    params.pop("name")
    try:
        sub = SubsolverConfig(**_section(cp, "subsolver", set(_SUB_KEYS)))
        inner = FCConfig(**_section(cp, "inner", set(_INNER_KEYS)))
        solver = SolverConfig(**_section(cp, "solver", set(_SOLVER_KEYS)), sub=sub, inner=inner)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid solver settings: {err}") from None
    exp = dict(_EXPERIMENT_KEYS)
    exp.update(_section(cp, "experiment", set(_EXPERIMENT_KEYS)))
    try:
        replications = int(exp.pop("replications"))
    except (TypeError, ValueError):
        raise ConfigError("replications must be an integer") from None
    checks = _as_tuple(exp.pop("checks"))
    cfg = ExperimentConfig(
        instance=name,
        instance_params=params,
        solver=solver,
        replications=replications,
        checks=checks,
        output=str(exp.pop("output")),
        mu0_atoms=exp.pop("mu0_atoms"),
        mu0_weights=exp.pop("mu0_weights"),
        options={k: (_as_tuple(v) if k in ("ks", "n_list", "t_list", "check_t") else v) for k, v in exp.items()},
    )
    cfg.validate()
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path!r}: {err}") from None
    return parse_config(text)
