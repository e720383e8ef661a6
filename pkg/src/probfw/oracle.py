"""Objective and influence-function oracles.

A :class:`ProblemInstance` bundles the exact evaluators of a functional
``J`` on probability measures together with optional per-sample oracles
``F(mu, Y)`` and ``H_mu(x, Y)``. Evaluators that depend on a measure are
built once per measure and then evaluated on many points, so the influence
oracle has the curried form ``influence_fn(mu)(points)``.
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Tuple

import numpy as np

from .errors import CapabilityError, OracleError
from .measure import AtomicMeasure, as_points, expect, mix, dirac, tv_distance
from .subsolver import SubsolverConfig, minimize_over_box

CONVEX, NONCONVEX, UNKNOWN = "convex", "nonconvex", "unknown"


@dataclass(frozen=True)
class InstanceTruth:
    """Known optimum and constants of an instance (any field may be missing)."""

    optimal_measure: Optional[AtomicMeasure] = None
    optimal_value: Optional[float] = None
    smoothness_L: Optional[float] = None
    diameter_R: float = 2.0


@dataclass(frozen=True)
class ProblemInstance:
    """A functional on probability measures over a box, with its oracles.

    Attributes
    ----------
    influence_fn : callable, optional
        ``influence_fn(mu)`` returns a vectorized ``x -> h_mu(x)``.
    sample_objective_fn : callable, optional
        ``sample_objective_fn(mu, ys)`` returns the ``m`` values ``F(mu, y_j)``.
    sample_influence_fn : callable, optional
        ``sample_influence_fn(mu, ys)`` returns ``x -> H_mu(x, y_j)`` with shape
        ``(n, m)``.
    mean_sample_influence_fn : callable, optional
        Faster ``x -> mean_j H_mu(x, y_j)``; must agree with the above.
    sampler : callable, optional
        ``sampler(gen, m)`` draws ``m`` i.i.d. copies of ``Y``.
    probe_support : ndarray, optional
        Atoms that random test measures should always contain.
    local_smoothness : callable, optional
        Maps a list of measures to a smoothness constant valid on the
        region they span, for instances that are only locally smooth.
    """

    name: str
    domain: Any
    objective_fn: Optional[Callable] = None
    influence_fn: Optional[Callable] = None
    sample_objective_fn: Optional[Callable] = None
    sample_influence_fn: Optional[Callable] = None
    mean_sample_influence_fn: Optional[Callable] = None
    sampler: Optional[Callable] = None
    truth: InstanceTruth = field(default_factory=InstanceTruth)
    convexity: str = UNKNOWN
    probe_support: Optional[np.ndarray] = None
    local_smoothness: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    @property
    def has_influence(self):
        return self.influence_fn is not None

    @property
    def has_objective(self):
        return self.objective_fn is not None

    @property
    def is_stochastic(self):
        return self.sampler is not None and self.sample_influence_fn is not None

    @property
    def has_sample_objective(self):
        return self.sampler is not None and self.sample_objective_fn is not None


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``.

    Each call to :meth:`generator` starts the stream afresh, so the same
    pair always yields the same draws.
    """

    seed: int
    stream_id: Tuple[int, ...] = (0, 0)

    def generator(self):
        ss = np.random.SeedSequence(int(self.seed), spawn_key=tuple(int(s) for s in self.stream_id))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *extra):
        return RngStream(self.seed, tuple(self.stream_id) + tuple(int(e) for e in extra))


def _require(ok, what, inst):
    if not ok:
        raise CapabilityError(f"instance {inst.name!r} has no {what}")


def _finite(vals, what):
    vals = np.asarray(vals, dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise OracleError(f"non-finite {what}")
    return vals


def _unwrap(vals, x, d):
    if np.ndim(x) == 0 or (np.ndim(x) == 1 and d > 1):
        return float(vals[0])
    return vals


def influence(inst, mu, x):
    """Exact influence ``h_mu(x)``; scalar for a single point."""
    _require(inst.has_influence, "exact influence", inst)
    pts = as_points(x, inst.domain.dim)
    return _unwrap(np.asarray(inst.influence_fn(mu)(pts), dtype=np.float64), x, inst.domain.dim)


def objective(inst, mu):
    """Exact objective ``J(mu)``."""
    _require(inst.has_objective, "exact objective", inst)
    return float(inst.objective_fn(mu))


def _draw(inst, m, rng):
    if m < 1:
        raise ValueError("sample size must be positive")
    return inst.sampler(rng.generator(), int(m))


def mc_influence_fn(inst, mu, m, rng):
    """Sampled influence ``x -> (1/m) sum_j H_mu(x, Y_j)`` with frozen draws.

    The same ``m`` draws are reused for every evaluation point.
    """
    _require(inst.is_stochastic, "stochastic influence oracle", inst)
    ys = _draw(inst, m, rng)
    if inst.mean_sample_influence_fn is not None:
        fast = inst.mean_sample_influence_fn(mu, ys)

        def h_m(pts):
            pts = as_points(pts, inst.domain.dim)
            return _finite(fast(pts), "sampled influence")

        return h_m
    per_sample = inst.sample_influence_fn(mu, ys)

    def h_m(pts):
        pts = as_points(pts, inst.domain.dim)
        return _finite(per_sample(pts), "sampled influence").mean(axis=1)

    return h_m


def mc_influence(inst, mu, x, m, rng):
    """Monte Carlo estimate ``H_{mu,m}(x)`` from ``m`` fresh draws."""
    _require(inst.is_stochastic, "stochastic influence oracle", inst)
    ys = _draw(inst, m, rng)
    pts = as_points(x, inst.domain.dim)
    vals = _finite(inst.sample_influence_fn(mu, ys)(pts), "sampled influence").mean(axis=1)
    return _unwrap(vals, x, inst.domain.dim)


def mc_objective(inst, mu, m, rng):
    """Monte Carlo estimate ``J_m(mu)`` from ``m`` fresh draws."""
    _require(inst.has_sample_objective, "stochastic objective oracle", inst)
    ys = _draw(inst, m, rng)
    return float(_finite(inst.sample_objective_fn(mu, ys), "sampled objective").mean())


def fd_influence(inst, mu, x, t=1e-5):
    """Difference quotient ``(J((1-t) mu + t delta_x) - J(mu)) / t``.

    Biased by ``O(t)``; used when no closed-form influence exists.
    """
    if not 0 < t <= 0.5:
        raise ValueError("t must lie in (0, 0.5]")
    pts = as_points(x, inst.domain.dim)
    j0 = objective(inst, mu)
    vals = np.array([(objective(inst, mix(mu, dirac(p, inst.domain), t)) - j0) / t for p in pts])
    return _unwrap(vals, x, inst.domain.dim)


def influence_or_fd(inst, mu, t=1e-5):
    """Vectorized influence at ``mu``; falls back to finite differences."""
    if inst.has_influence:
        return inst.influence_fn(mu)
    _require(inst.has_objective, "objective for finite differences", inst)
    return lambda pts: np.atleast_1d(fd_influence(inst, mu, as_points(pts, inst.domain.dim), t))


def von_mises(inst, mu, nu):
    """Directional derivative ``J'_mu(nu - mu) = E_{X ~ nu} h_mu(X)``."""
    _require(inst.has_influence, "exact influence", inst)
    return expect(nu, inst.influence_fn(mu))


def fw_gap(inst, mu, cfg=None, h=None):
    """Frank-Wolfe gap ``G(mu) = -min_x h_mu(x)``.

    The subsolver result is compared with ``h`` at the atoms of ``mu`` and
    the smaller value is used. The gap is clipped at zero, which is exact
    because ``h_mu`` integrates to zero against ``mu``.
    """
    if h is None:
        _require(inst.has_influence, "exact influence", inst)
        h = inst.influence_fn(mu)
    res = minimize_over_box(h, inst.domain, cfg or SubsolverConfig())
    at_atoms = float(np.min(h(mu.atoms)))
    return max(0.0, -min(res.min_value, at_atoms))


def random_measure(inst_or_dom, rng, max_atoms=4):
    """Random atomic measure for property tests.

    Atoms are uniform in the box with Dirichlet weights; atoms listed in an
    instance's ``probe_support`` are always included.
    """
    dom = getattr(inst_or_dom, "domain", inst_or_dom)
    extra = getattr(inst_or_dom, "probe_support", None)
    n = int(rng.integers(1, max_atoms + 1))
    pts = dom.lower + (dom.upper - dom.lower) * rng.random((n, dom.dim))
    if extra is not None:
        pts = np.concatenate([pts, as_points(extra, dom.dim)])
    w = rng.dirichlet(np.ones(pts.shape[0]))
    return AtomicMeasure(pts, w, dom)


def estimate_smoothness(inst, rng, pairs=200, grid=257, inflate=1.5, measures=None):
    """Estimate ``L`` by ``sup_x |h_mu - h_nu| / tv(mu, nu)`` over random pairs.

    Returns the largest observed ratio times ``inflate``.
    """
    _require(inst.has_influence, "exact influence", inst)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    per = grid if inst.domain.dim == 1 else max(5, int(round(grid ** (1.0 / inst.domain.dim))))
    pts = inst.domain.grid(per)
    best = 0.0
    pool = list(measures) if measures is not None else []
    for i in range(pairs):
        if pool and i < len(pool) - 1:
            mu, nu = pool[i], pool[i + 1]
        else:
            mu = random_measure(inst, gen)
            nu = random_measure(inst, gen) if gen.random() < 0.5 else mix(mu, random_measure(inst, gen), gen.random())
        tv = tv_distance(mu, nu)
        if tv < 1e-12:
            continue
        try:
            diff = np.max(np.abs(inst.influence_fn(mu)(pts) - inst.influence_fn(nu)(pts)))
        except (ArithmeticError, ValueError):
            continue
        best = max(best, diff / tv)
    return inflate * best


def clt_constant_samples(inst, mu, m, reps, rng, grid=129):
    """Draws of ``sqrt(m) * sup_grid |H_{mu,m} - h_mu|`` over replications."""
    _require(inst.has_influence and inst.is_stochastic, "exact and sampled influence", inst)
    per = grid if inst.domain.dim == 1 else max(5, int(round(grid ** (1.0 / inst.domain.dim))))
    pts = inst.domain.grid(per)
    exact = inst.influence_fn(mu)(pts)
    out = np.empty(reps)
    for r in range(reps):
        h_m = mc_influence_fn(inst, mu, m, rng.child(m, r))
        out[r] = np.sqrt(m) * np.max(np.abs(h_m(pts) - exact))
    return out


def deterministic_wrap(inst):
    """Copy of ``inst`` whose stochastic oracles are exact (zero variance).

    ``Y`` is a dummy draw and ``F``, ``H`` ignore it.
    """
    _require(inst.has_influence and inst.has_objective, "exact oracles", inst)

    def sampler(gen, m):
        return np.zeros(m)

    def sample_objective(mu, ys):
        return np.full(len(ys), inst.objective_fn(mu))

    def sample_influence(mu, ys):
        h = inst.influence_fn(mu)
        return lambda pts: np.repeat(np.asarray(h(pts))[:, None], len(ys), axis=1)

    def mean_sample_influence(mu, ys):
        return inst.influence_fn(mu)

    from dataclasses import replace

    return replace(
        inst,
        name=inst.name + "+exact_samples",
        sampler=sampler,
        sample_objective_fn=sample_objective,
        sample_influence_fn=sample_influence,
        mean_sample_influence_fn=mean_sample_influence,
        params={**inst.params, "zero_variance": True},
    )
