"""Moment-matching instances: ``J(mu) = g(E_mu f - y0)``."""
import numpy as np

from ..measure import AtomicMeasure, dirac
from ..oracle import CONVEX, NONCONVEX, InstanceTruth, ProblemInstance
from ._common import col, extremes, interval, named_function


def _check_target(fmin, fmax, y0):
    if not fmin - 1e-12 <= y0 <= fmax + 1e-12:
        raise ValueError(f"target y0={y0} outside the range [{fmin:g}, {fmax:g}] of f")


def _optimum(dom, f, y0):
    xlo, fmin, xhi, fmax = extremes(f, dom)
    _check_target(fmin, fmax, y0)
    if fmax == fmin:
        return dirac(xlo, dom), fmin, fmax
    p = float(np.clip((y0 - fmin) / (fmax - fmin), 0.0, 1.0))
    if p == 0.0:
        return dirac(xlo, dom), fmin, fmax
    if p == 1.0:
        return dirac(xhi, dom), fmin, fmax
    mu = AtomicMeasure([xhi, xlo], [p, 1.0 - p], dom)
    return mu, fmin, fmax


def build_calibration(f="identity", y0=0.3, dom=(0.0, 1.0)):
    """Match the mean of ``f`` to a target: ``J(mu) = (int f dmu - y0)^2``.

    Parameters
    ----------
    f : callable or str
        Vectorized function of one variable, or a name such as ``"identity"``.
    y0 : float
        Target, which must lie between the min and max of ``f``.
    dom : BoxDomain or (a, b)

    Returns
    -------
    ProblemInstance
        Convex; the optimum mixes the argmax and argmin of ``f``.
    """
    dom = interval(dom)
    fn = named_function(f)
    y0 = float(y0)
    mu_star, fmin, fmax = _optimum(dom, fn, y0)
    w = fmax - fmin
    lip = 2.0 * w * max(abs(fmax + y0 - 2 * fmin), abs(fmin + y0 - 2 * fmax))

    def mean_f(mu):
        return float(mu.weights @ fn(mu.atoms[:, 0]))

    def objective_fn(mu):
        return (mean_f(mu) - y0) ** 2

    def influence_fn(mu):
        s = mean_f(mu)
        c = 2.0 * (s - y0)
        return lambda pts: c * (fn(col(pts)) - s)

    truth = InstanceTruth(mu_star, 0.0, lip)
    return ProblemInstance(
        name="calibration",
        domain=dom,
        objective_fn=objective_fn,
        influence_fn=influence_fn,
        truth=truth,
        convexity=CONVEX,
        params={"f": f if isinstance(f, str) else getattr(f, "__name__", "f"), "y0": y0},
    )


def build_nonconvex_calibration(f="identity", y0=0.3, dom=(0.0, 1.0), noise_scale=0.1):
    """Nonconvex moment matching: ``J(mu) = g(z)``, ``z = int f dmu - y0``.

    ``g(z) = z^2 - z^4 / 2`` is nonconvex on the reachable range once
    ``|z| > 1/sqrt(3)``. The stochastic oracle adds Gaussian noise of size
    ``noise_scale`` to ``g`` and ``g'``, which keeps it unbiased.

    Returns
    -------
    ProblemInstance
        ``J* = 0`` at any measure whose ``f``-mean equals ``y0``.
    """
    dom = interval(dom)
    fn = named_function(f)
    y0 = float(y0)
    mu_star, fmin, fmax = _optimum(dom, fn, y0)
    width = fmax - fmin
    sigma = float(noise_scale)
    zs = np.linspace(fmin - y0, fmax - y0, 20001)

    def g(z):
        return z * z - 0.5 * z**4

    def dg(z):
        return 2.0 * z - 2.0 * z**3

    d2 = np.abs(2.0 - 6.0 * zs * zs).max()
    d1 = np.abs(dg(zs)).max()
    lip = float(d2 * width * width + d1 * width)

    def mean_f(mu):
        return float(mu.weights @ fn(mu.atoms[:, 0]))

    def objective_fn(mu):
        return float(g(mean_f(mu) - y0))

    def influence_fn(mu):
        s = mean_f(mu)
        c = dg(s - y0)
        return lambda pts: c * (fn(col(pts)) - s)

    def sampler(gen, m):
        return gen.standard_normal(m)

    def sample_objective_fn(mu, ys):
        return g(mean_f(mu) - y0) + sigma * np.asarray(ys)

    def sample_influence_fn(mu, ys):
        s = mean_f(mu)
        slopes = dg(s - y0) + sigma * np.asarray(ys)
        return lambda pts: (fn(col(pts)) - s)[:, None] * slopes[None, :]

    def mean_sample_influence_fn(mu, ys):
        s = mean_f(mu)
        slope = dg(s - y0) + sigma * float(np.mean(ys))
        return lambda pts: slope * (fn(col(pts)) - s)

    return ProblemInstance(
        name="nonconvex",
        domain=dom,
        objective_fn=objective_fn,
        influence_fn=influence_fn,
        sample_objective_fn=sample_objective_fn,
        sample_influence_fn=sample_influence_fn,
        mean_sample_influence_fn=mean_sample_influence_fn,
        sampler=sampler,
        truth=InstanceTruth(mu_star, 0.0, lip),
        convexity=NONCONVEX,
        params={"f": f if isinstance(f, str) else "f", "y0": y0, "noise_scale": sigma},
    )
