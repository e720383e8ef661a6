"""Cumulative residual entropy on a positive interval.

``J(mu) = int_0^inf S(l) log S(l) dl`` with ``S(l) = mu((l, inf))``; minimizing
``J`` maximizes the entropy ``-J``.
"""
import numpy as np

from ..measure import AtomicMeasure
from ..oracle import CONVEX, InstanceTruth, ProblemInstance
from ._common import col, interval


def _survival(mu):
    """Sorted distinct atoms and ``S`` on each gap ``[x_(j), x_(j+1))``."""
    x = mu.atoms[:, 0]
    order = np.argsort(x, kind="stable")
    xs, ws = x[order], mu.weights[order]
    knots, start = np.unique(xs, return_index=True)
    mass = np.add.reduceat(ws, start)
    surv = np.clip(1.0 - np.cumsum(mass), 0.0, 1.0)
    surv[-1] = 0.0
    return knots, surv


def _xlogx(s):
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = s[pos] * np.log(s[pos])
    return out


def build_cre(a=1.0, b=2.0, survival_floor=1e-12):
    """CRE instance on ``[a, b]`` with ``0 < a < b``.

    Parameters
    ----------
    a, b : float
    survival_floor : float
        The influence ``int_0^x (log S + 1) dl`` is ``-inf`` for ``x`` beyond
        the last atom. ``log S`` is evaluated as ``log(max(S, floor))`` so the
        subproblem stays finite; it then favours such points strongly.

    Returns
    -------
    ProblemInstance
        The minimizer over measures on ``[a, b]`` is
        ``(1 - 1/e) delta_a + (1/e) delta_b`` with ``J* = -(b - a)/e``:
        ``s log s >= -1/e`` pointwise, with equality iff ``S = 1/e`` on
        ``(a, b)``.
    """
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")
    dom = interval((a, b))
    log_floor = float(np.log(survival_floor))

    def objective_fn(mu):
        knots, surv = _survival(mu)
        # S = 1 on [0, x_(1)) contributes 1 log 1 = 0
        return float(np.sum(np.diff(knots) * _xlogx(surv[:-1])))

    def influence_fn(mu):
        knots, surv = _survival(mu)
        logs = np.where(surv > 0, np.log(np.maximum(surv, 1e-300)), log_floor)
        slope = logs + 1.0
        # G(x) = int_0^x (log S + 1) dl, piecewise linear with knots at atoms
        g_knots = knots[0] + np.concatenate([[0.0], np.cumsum(np.diff(knots) * slope[:-1])])
        const = knots[0] + float(np.sum(np.diff(knots) * slope[:-1] * surv[:-1]))

        def h(pts):
            x = col(pts)
            j = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, len(knots) - 1)
            below = x < knots[0]
            g = np.where(below, x, g_knots[j] + (x - knots[j]) * slope[j])
            return g - const

        return h

    p = np.exp(-1.0)
    mu_star = AtomicMeasure([a, b], [1.0 - p, p], dom)
    return ProblemInstance(
        name="cre",
        domain=dom,
        objective_fn=objective_fn,
        influence_fn=influence_fn,
        truth=InstanceTruth(mu_star, -(b - a) * p, None),
        convexity=CONVEX,
        probe_support=np.array([[b]]),
        params={"a": a, "b": b, "survival_floor": survival_floor},
    )


def half_half(a=1.0, b=2.0):
    """The equal-weight two-point measure on the interval ends."""
    return AtomicMeasure([a, b], [0.5, 0.5], interval((a, b)))
