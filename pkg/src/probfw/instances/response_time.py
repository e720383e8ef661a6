"""Response-time instances on an interval.

Variant (a) is linear in ``mu``: the mean travel cost to an incident drawn
from ``eta``. Variant (b) matches the response-time distribution to a
target CDF ``F*`` in squared L2.
"""
import numpy as np

from ..measure import AtomicMeasure, dirac, grid_cloud
from ..oracle import CONVEX, InstanceTruth, ProblemInstance
from ..subsolver import SubsolverConfig, minimize_over_box
from ._common import col, interval


def abs_cost(x, y):
    """Travel time ``|x - y|`` for every pair, shape (len(x), len(y))."""
    return np.abs(np.subtract.outer(x, y))


def build_response_time_a(cost=abs_cost, eta=None, dom=(0.0, 1.0)):
    """Expected response cost ``J(mu) = E_{Y~eta} E_{X~mu} t(X, Y)``.

    Parameters
    ----------
    cost : callable
        ``cost(x, y)`` on 1-d arrays returning the ``(len(x), len(y))`` matrix.
    eta : AtomicMeasure, optional
        Incident distribution; defaults to 201 equally spaced atoms.
    dom : BoxDomain or (a, b)
    """
    dom = interval(dom)
    if eta is None:
        eta = grid_cloud(dom, 201)
    ys = eta.atoms[:, 0].copy()
    pw = eta.weights.copy()

    def mean_cost(x):
        return cost(x, ys) @ pw

    def objective_fn(mu):
        return float(mu.weights @ mean_cost(mu.atoms[:, 0]))

    def influence_fn(mu):
        j = objective_fn(mu)
        return lambda pts: mean_cost(col(pts)) - j

    def sampler(gen, m):
        return ys[gen.choice(ys.shape[0], size=m, p=pw)]

    def sample_objective_fn(mu, draws):
        return mu.weights @ cost(mu.atoms[:, 0], np.asarray(draws))

    def sample_influence_fn(mu, draws):
        draws = np.asarray(draws)
        fvals = sample_objective_fn(mu, draws)
        return lambda pts: cost(col(pts), draws) - fvals[None, :]

    def mean_cost_pts(pts):
        return mean_cost(col(pts))

    res = minimize_over_box(mean_cost_pts, dom, SubsolverConfig(grid_points_per_dim=1025))
    fine = mean_cost_pts(dom.grid(4097))
    mu_star = dirac(res.minimizer, dom)
    truth = InstanceTruth(mu_star, float(res.min_value), float(fine.max() - min(fine.min(), res.min_value)))
    return ProblemInstance(
        name="response_time_a",
        domain=dom,
        objective_fn=objective_fn,
        influence_fn=influence_fn,
        sample_objective_fn=sample_objective_fn,
        sample_influence_fn=sample_influence_fn,
        sampler=sampler,
        truth=truth,
        convexity=CONVEX,
        params={"eta_atoms": int(ys.shape[0])},
    )


def _seg_sq_integral(length, ea, eb):
    """Integral of the square of a linear function with end values ea, eb."""
    return length * (ea * ea + ea * eb + eb * eb) / 3.0


class _TargetCdf:
    """Piecewise-linear nondecreasing CDF on ``[0, inf)`` reaching one."""

    def __init__(self, knots_t, knots_f):
        t = np.asarray(knots_t, dtype=np.float64)
        fv = np.asarray(knots_f, dtype=np.float64)
        if t.ndim != 1 or t.shape != fv.shape or t.shape[0] < 1:
            raise ValueError("target CDF needs matching 1-d knot arrays")
        if t[0] < 0 or np.any(np.diff(t) < 0):
            raise ValueError("target CDF knots must be nonnegative and sorted")
        if np.any(np.diff(fv) < 0) or fv[0] < 0 or abs(fv[-1] - 1.0) > 1e-12:
            raise ValueError("target CDF must be nondecreasing in [0, 1] and end at 1")
        if t[0] > 0:
            t = np.concatenate([[0.0], t])
            fv = np.concatenate([[fv[0]], fv])
        self.t = t
        self.f = fv

    def __call__(self, s):
        return np.interp(s, self.t, self.f, right=1.0)


def build_response_time_b(eta=None, target=None, speed=1.0, dom=(0.0, 1.0), optimal_value=None):
    """Distribution matching ``J(mu) = int_0^inf (F_mu(t) - F*(t))^2 dt``.

    ``F_mu(t) = P(|Y - X| <= v t)`` with ``X ~ mu`` and ``Y ~ eta``. With the
    defaults (``eta = delta_{1/2}``, ``F*(t) = min(2t, 1)``, ``v = 1`` on
    ``[0, 1]``) the infimum 0 is reached only by the uniform law, so every
    finitely supported measure is suboptimal.

    Parameters
    ----------
    eta : AtomicMeasure, optional
    target : (knots_t, knots_f), optional
        Piecewise-linear target CDF; constant 1 after the last knot.
    speed : float
    dom : BoxDomain or (a, b)
    optimal_value : float, optional
        Known infimum; set automatically for the default setup.
    """
    dom = interval(dom)
    default = eta is None and target is None and speed == 1.0
    if eta is None:
        eta = dirac(0.5 * (dom.lower[0] + dom.upper[0]), dom)
    if target is None:
        target = ([0.0, 0.5], [0.0, 1.0])
    cdf = _TargetCdf(*target)
    v = float(speed)
    if v <= 0:
        raise ValueError("speed must be positive")
    ys = eta.atoms[:, 0].copy()
    pw = eta.weights.copy()
    horizon = max(cdf.t[-1], dom.diameter / v)

    def profile(mu):
        """Breakpoints and F_mu on each segment between them."""
        dist = np.abs(np.subtract.outer(mu.atoms[:, 0], ys)).ravel() / v
        mass = np.outer(mu.weights, pw).ravel()
        order = np.argsort(dist, kind="stable")
        dist, mass = dist[order], mass[order]
        brk = np.unique(np.concatenate([[0.0], dist, cdf.t, [horizon]]))
        # F_mu is right-continuous: its value on [brk[i], brk[i+1])
        fmu = np.concatenate([[0.0], np.cumsum(mass)])[np.searchsorted(dist, brk[:-1], side="right")]
        return brk, np.minimum(fmu, 1.0)

    def pieces(mu):
        brk, fmu = profile(mu)
        lo, hi = brk[:-1], brk[1:]
        ea = fmu - cdf(lo)
        eb = fmu - cdf(hi)
        return brk, fmu, ea, eb

    def objective_fn(mu):
        brk, _, ea, eb = pieces(mu)
        return float(np.sum(_seg_sq_integral(np.diff(brk), ea, eb)))

    def influence_fn(mu):
        brk, fmu, ea, eb = pieces(mu)
        seg = np.diff(brk) * (ea + eb) / 2.0
        tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
        const = 2.0 * float(np.sum(fmu * seg))

        def tail_at(s):
            s = np.clip(s, 0.0, brk[-1])
            i = np.clip(np.searchsorted(brk, s, side="right") - 1, 0, len(seg) - 1)
            # D is linear on each segment: integrate it from s to the segment end
            d_s = fmu[i] - cdf(s)
            return tail[i + 1] + (brk[i + 1] - s) * (d_s + eb[i]) / 2.0

        def h(pts):
            r = np.abs(np.subtract.outer(col(pts), ys)) / v
            return 2.0 * (tail_at(r) @ pw) - const

        return h

    truth_value = 0.0 if default else optimal_value
    return ProblemInstance(
        name="response_time_b",
        domain=dom,
        objective_fn=objective_fn,
        influence_fn=influence_fn,
        truth=InstanceTruth(None, truth_value, 6.0 * horizon),
        convexity=CONVEX,
        params={"speed": v, "eta_atoms": int(ys.shape[0]), "target_knots": cdf.t.tolist()},
    )
