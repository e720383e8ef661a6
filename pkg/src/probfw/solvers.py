"""Frank-Wolfe recursions over atomic probability measures.

Every variant adds one Dirac per iteration at a minimizer of the (exact or
sampled) influence function. The plain variants mix it in with step
``eta_k``; the fully-corrective variants re-optimize the weights over all
atoms found so far.
"""
import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, List, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import CapabilityError, InnerSolverError, SolverError
from .measure import ATOM_TOL, AtomicMeasure, consolidate, dirac, mix
from .oracle import RngStream, influence_or_fd, mc_influence_fn
from .subsolver import SubsolverConfig, minimize_over_box

VARIANTS = ("dfw", "sfw", "fixed_sfw", "fc_dfw", "fc_sfw")


@dataclass(frozen=True)
class FCConfig:
    """Inner reweighting settings for the fully-corrective variants."""

    inner_max_iters: int = 200
    inner_gap_tol: float = 1e-10
    line_xtol: float = 1e-13
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.inner_max_iters < 1 or self.inner_gap_tol <= 0 or self.line_xtol <= 0:
            raise ValueError("FCConfig tolerances and iteration cap must be positive")


@dataclass(frozen=True)
class SolverConfig:
    """Settings shared by all recursions.

    ``step_schedule="harmonic"`` gives ``eta_k = 2 / (k + 2 + step_offset)``;
    ``"fixed"`` uses ``fixed_eta``. ``sample_schedule="quadratic"`` gives
    ``m_{k+1} = ceil(c_m (k + 2)^2)``; ``"fixed"`` uses ``fixed_m``.
    """

    variant: str = "dfw"
    max_iters: int = 100
    step_schedule: str = "harmonic"
    step_offset: float = 0.0
    sample_schedule: str = "quadratic"
    c_m: float = 1.0
    fixed_eta: Optional[float] = None
    fixed_m: Optional[int] = None
    epsilon_tilde: float = 0.0
    inner: FCConfig = field(default_factory=FCConfig)
    sub: SubsolverConfig = field(default_factory=SubsolverConfig)
    seed: int = 0
    replication: int = 0
    gap_every: int = 10
    atom_tol: float = ATOM_TOL
    weight_tol: float = 0.0
    audit_every: int = 10
    audit_grid: int = 4097
    keep_iterates: bool = False
    timing: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.step_schedule not in ("harmonic", "fixed"):
            raise ValueError("step_schedule must be 'harmonic' or 'fixed'")
        if self.sample_schedule not in ("quadratic", "fixed"):
            raise ValueError("sample_schedule must be 'quadratic' or 'fixed'")
        if self.step_schedule == "fixed" and not (self.fixed_eta is not None and 0 < self.fixed_eta <= 1):
            raise ValueError("fixed step schedule needs fixed_eta in (0, 1]")
        if self.sample_schedule == "fixed" and not (self.fixed_m is not None and self.fixed_m >= 1):
            raise ValueError("fixed sample schedule needs fixed_m >= 1")
        if self.variant == "fixed_sfw" and (self.step_schedule, self.sample_schedule) != ("fixed", "fixed"):
            raise ValueError("fixed_sfw needs fixed step and sample schedules")
        if self.c_m <= 0 or self.epsilon_tilde < 0 or self.step_offset < 0:
            raise ValueError("c_m must be positive; epsilon_tilde and step_offset nonnegative")

    def eta(self, k):
        if self.step_schedule == "fixed":
            return float(self.fixed_eta)
        return 2.0 / (k + 2.0 + self.step_offset)

    def sample_size(self, k):
        """Sample size ``m_{k+1}`` used for the step from ``mu_k``."""
        if self.sample_schedule == "fixed":
            return int(self.fixed_m)
        return int(math.ceil(self.c_m * (k + 2) ** 2 - 1e-9))


@dataclass
class TraceRow:
    k: int
    objective: Optional[float]
    obj_gap: Optional[float]
    fw_gap: Optional[float]
    atoms: int
    eta: Optional[float]
    m: Optional[int]
    minimizer: Optional[np.ndarray]
    elapsed_ms: Optional[float]


@dataclass
class Trace:
    """Per-iteration record of a run; row ``k`` describes ``mu_k``."""

    rows: List[TraceRow] = field(default_factory=list)
    final: Optional[AtomicMeasure] = None
    iterates: Optional[List[AtomicMeasure]] = None
    meta: dict = field(default_factory=dict)

    def column(self, name):
        vals = [getattr(r, name) for r in self.rows]
        return np.array([np.nan if v is None else v for v in vals], dtype=np.float64)

    def __len__(self):
        return len(self.rows)


def _check_feasible(mu, dom):
    w = mu.weights
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise SolverError(f"iterate left the simplex (sum={w.sum()!r})")
    if not np.all(dom.contains(mu.atoms)):
        raise SolverError("iterate has an atom outside the domain")


class _Recorder:
    def __init__(self, inst, cfg):
        self.inst = inst
        self.cfg = cfg
        self.trace = Trace(iterates=[] if cfg.keep_iterates else None)
        self.t0 = time.perf_counter()
        self.j_star = inst.truth.optimal_value

    def add(self, k, mu, eta, m, x):
        _check_feasible(mu, self.inst.domain)
        j = float(self.inst.objective_fn(mu)) if self.inst.has_objective else None
        gap = None if (j is None or self.j_star is None) else j - self.j_star
        ms = (time.perf_counter() - self.t0) * 1e3 if self.cfg.timing else None
        self.trace.rows.append(TraceRow(k, j, gap, None, len(mu), eta, m, x, ms))
        if self.trace.iterates is not None:
            self.trace.iterates.append(mu)

    def want_gap(self, k):
        g = self.cfg.gap_every
        return g > 0 and (k % g == 0 or k == self.cfg.max_iters)

    def set_gap(self, k, value):
        self.trace.rows[k].fw_gap = max(0.0, float(value))


def _exact_gap(inst, mu, sub, h=None):
    if h is None:
        if not inst.has_influence:
            return None
        h = inst.influence_fn(mu)
    res = minimize_over_box(h, inst.domain, sub)
    return -min(res.min_value, float(np.min(h(mu.atoms))))


def _simplex_objective(inst, atoms, dom):
    def J(w):
        return float(inst.objective_fn(AtomicMeasure._trusted(atoms, w, dom)))

    return J


def simplex_reweight(inst, atoms, w0, fc=None):
    """Minimize ``w -> J(sum_i w_i delta_{x_i})`` over the simplex.

    Pairwise Frank-Wolfe on the simplex: the gradient coordinate ``i`` is
    ``h_mu(x_i)``; each step moves mass from the active atom with the largest
    influence value to the atom with the smallest, with an exact bounded
    line search. Stops when ``sum_i w_i h(x_i) - min_i h(x_i)`` falls below
    ``fc.inner_gap_tol``. Uses finite differences when the instance has no
    closed-form influence.

    Returns
    -------
    weights : ndarray
    info : dict
        ``iters`` and final ``gap``.
    """
    fc = fc or FCConfig()
    if not inst.has_objective:
        raise CapabilityError("fully-corrective reweighting needs the exact objective")
    dom = inst.domain
    atoms = np.ascontiguousarray(np.asarray(atoms, dtype=np.float64).reshape(-1, dom.dim))
    atoms.flags.writeable = False
    w = np.asarray(w0, dtype=np.float64).copy()
    w = np.maximum(w, 0.0)
    w /= w.sum()
    if w.shape[0] == 1:
        return w, {"iters": 0, "gap": 0.0}
    J = _simplex_objective(inst, atoms, dom)
    gap = np.inf
    it = 0
    for it in range(1, fc.inner_max_iters + 1):
        wr = w.copy()
        wr.flags.writeable = False
        mu = AtomicMeasure._trusted(atoms, wr, dom)
        g = np.asarray(influence_or_fd(inst, mu, fc.fd_step)(atoms), dtype=np.float64)
        active = w > 0
        i = int(np.argmin(g))
        j = int(np.flatnonzero(active)[np.argmax(g[active])])
        gap = float(w @ g - g[i])
        if gap <= fc.inner_gap_tol or i == j:
            break
        cap = w[j]

        def along(gamma):
            v = w.copy()
            v[i] += gamma
            v[j] -= gamma
            v[j] = max(v[j], 0.0)
            return J(v)

        f0 = along(0.0)
        fcap = along(cap)
        res = minimize_scalar(along, bounds=(0.0, cap), method="bounded", options={"xatol": fc.line_xtol * max(cap, 1e-300) + 1e-300})
        cands = [(f0, 0.0), (fcap, cap), (float(res.fun), float(res.x))]
        best_f, best_g = min(cands, key=lambda c: (c[0], -c[1]))
        if best_g <= 0.0:
            break
        w[i] += best_g
        w[j] = 0.0 if best_g >= cap else w[j] - best_g
        w = np.maximum(w, 0.0)
        w /= w.sum()
    return w, {"iters": it, "gap": gap}


def _plain_step_weights(atoms, weights, x, eta, tol):
    """Atoms of ``mu_k`` plus ``x``, with the plain FW step weights."""
    d = np.sqrt(np.sum((atoms - x) ** 2, axis=1))
    hit = np.flatnonzero(d <= tol)
    w = (1.0 - eta) * weights
    if hit.size:
        w = w.copy()
        w[hit[0]] += eta
        return atoms, w
    return np.vstack([atoms, x[None, :]]), np.concatenate([w, [eta]])


def _picker(inst, cfg):
    """Return ``pick(mu, k) -> (x, exact_h_min or None, m or None, audit)``."""
    stochastic = cfg.variant in ("sfw", "fixed_sfw", "fc_sfw")
    if stochastic:
        if not inst.is_stochastic:
            raise CapabilityError(f"variant {cfg.variant!r} needs a stochastic influence oracle on {inst.name!r}")
        inexact = cfg.variant == "fixed_sfw" and cfg.epsilon_tilde > 0
        sub = replace(cfg.sub, refine=False) if inexact else cfg.sub
        fine = SubsolverConfig(grid_points_per_dim=cfg.audit_grid)

        def pick(mu, k):
            m = cfg.sample_size(k)
            h_m = mc_influence_fn(inst, mu, m, RngStream(cfg.seed, (k, cfg.replication)))
            res = minimize_over_box(h_m, inst.domain, sub)
            audit = None
            if inexact and cfg.audit_every > 0 and k % cfg.audit_every == 0:
                ref = minimize_over_box(h_m, inst.domain, fine)
                audit = (k, res.min_value - min(ref.min_value, res.min_value))
            return res.minimizer, None, m, audit

        return pick

    if not inst.has_influence:
        raise CapabilityError(f"variant {cfg.variant!r} needs an exact influence oracle on {inst.name!r}")

    def pick(mu, k):
        h = inst.influence_fn(mu)
        res = minimize_over_box(h, inst.domain, cfg.sub)
        return res.minimizer, min(res.min_value, float(np.min(h(mu.atoms)))), None, None

    return pick


def run(inst, mu0=None, cfg=None):
    """Run the recursion named by ``cfg.variant``.

    Parameters
    ----------
    inst : ProblemInstance
    mu0 : AtomicMeasure, optional
        Starting measure; defaults to a Dirac at the box center.
    cfg : SolverConfig

    Returns
    -------
    Trace
        ``K + 1`` rows, ``mu_0`` through ``mu_K``.

    Raises
    ------
    CapabilityError
        If the instance lacks an oracle the variant needs.
    SolverError
        If an oracle or the subsolver fails mid-run; ``err.trace`` holds the
        rows produced so far.
    """
    cfg = cfg or SolverConfig()
    if mu0 is None:
        mu0 = dirac(inst.domain.center, inst.domain)
    if mu0.domain != inst.domain:
        raise ValueError("mu0 lives on a different domain than the instance")
    corrective = cfg.variant.startswith("fc_")
    if corrective and not inst.has_objective:
        raise CapabilityError("fully-corrective variants need the exact objective")
    pick = _picker(inst, cfg)
    rec = _Recorder(inst, cfg)
    audits = []
    inner_log = []
    mu = mu0
    support = np.asarray(mu0.atoms)
    try:
        rec.add(0, mu, None, None, None)
        for k in range(cfg.max_iters):
            x, hmin, m, audit = pick(mu, k)
            if audit is not None:
                audits.append(audit)
            if rec.want_gap(k):
                gap = -hmin if hmin is not None else _exact_gap(inst, mu, cfg.sub)
                if gap is not None:
                    rec.set_gap(k, gap)
            eta = cfg.eta(k)
            if corrective:
                mu = _corrective_step(inst, cfg, mu, support, x, eta, inner_log, k)
                support = _grow(support, x, cfg.atom_tol)
            else:
                mu = mix(mu, dirac(x, inst.domain), eta, cfg.atom_tol)
                if cfg.weight_tol > 0:
                    mu = consolidate(mu, cfg.atom_tol, cfg.weight_tol)
            rec.add(k + 1, mu, eta, m, np.asarray(x).copy())
        if rec.want_gap(cfg.max_iters):
            gap = _exact_gap(inst, mu, cfg.sub)
            if gap is not None:
                rec.set_gap(cfg.max_iters, gap)
    except (CapabilityError, InnerSolverError):
        raise
    except (ArithmeticError, RuntimeError, ValueError) as err:
        rec.trace.final = mu
        raise SolverError(f"{cfg.variant} aborted at k={len(rec.trace.rows) - 1}: {err}", trace=rec.trace, cause=err) from err
    rec.trace.final = mu
    rec.trace.meta.update(
        variant=cfg.variant,
        seed=cfg.seed,
        replication=cfg.replication,
        audits=audits,
        epsilon_tilde=cfg.epsilon_tilde,
        inner=inner_log,
    )
    return rec.trace


def _grow(support, x, tol):
    d = np.sqrt(np.sum((support - x) ** 2, axis=1))
    if np.any(d <= tol):
        return support
    return np.vstack([support, np.asarray(x)[None, :]])


def _corrective_step(inst, cfg, mu, support, x, eta, inner_log, k):
    """Reweight over every atom found so far, warm-started at the plain step."""
    # current weights on the full support (zero where mu has dropped an atom)
    w_cur = np.zeros(support.shape[0])
    for a, wa in zip(mu.atoms, mu.weights):
        d = np.sqrt(np.sum((support - a) ** 2, axis=1))
        w_cur[int(np.argmin(d))] += wa
    atoms, w_plain = _plain_step_weights(support, w_cur, np.asarray(x), eta, cfg.atom_tol)
    atoms = np.ascontiguousarray(atoms)
    atoms.flags.writeable = False
    J = _simplex_objective(inst, atoms, inst.domain)
    j_plain = J(w_plain)
    w, info = simplex_reweight(inst, atoms, w_plain, cfg.inner)
    j_new = J(w)
    if j_new > j_plain + 1e-12 * (1.0 + abs(j_plain)):
        raise InnerSolverError(
            f"reweighting increased J at k={k}: {j_plain!r} -> {j_new!r}",
            diagnostics={"k": k, "j_plain": j_plain, "j_new": j_new, **info},
        )
    inner_log.append((k, info["iters"], info["gap"]))
    keep = w > 0
    return AtomicMeasure(atoms[keep], w[keep] / w[keep].sum(), inst.domain)


def run_dfw(inst, mu0=None, cfg=None):
    """Deterministic Frank-Wolfe: exact influence, harmonic steps by default."""
    return run(inst, mu0, replace(cfg or SolverConfig(), variant="dfw"))


def run_sfw(inst, mu0=None, cfg=None):
    """Stochastic Frank-Wolfe with a frozen sampled subproblem per step."""
    return run(inst, mu0, replace(cfg or SolverConfig(), variant="sfw"))


def run_fixed_sfw(inst, mu0=None, cfg=None):
    """Fixed-step fixed-sample stochastic Frank-Wolfe, optionally inexact.

    ``cfg`` must set ``fixed_eta`` and ``fixed_m``. With
    ``epsilon_tilde > 0`` the subproblem is solved on the grid only and the
    achieved suboptimality is audited against a fine grid every
    ``audit_every`` steps (``trace.meta["audits"]``).
    """
    cfg = cfg or SolverConfig()
    return run(inst, mu0, replace(cfg, variant="fixed_sfw", step_schedule="fixed", sample_schedule="fixed"))


def run_fully_corrective(inst, mu0=None, cfg=None, stochastic=False):
    """Fully-corrective Frank-Wolfe (exact or sampled atom search)."""
    return run(inst, mu0, replace(cfg or SolverConfig(), variant="fc_sfw" if stochastic else "fc_dfw"))
