"""Gaussian deconvolution: nonparametric maximum likelihood for a mixing law."""
import numpy as np
from scipy.special import logsumexp

from ..measure import dirac
from ..oracle import CONVEX, InstanceTruth, ProblemInstance
from ._common import col, interval

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def build_deconvolution(data=(0.0,), sigma=1.0, dom=(-1.0, 1.0)):
    """``J(mu) = -sum_i log int phi_sigma(Y_i - t) dmu(t)``.

    Likelihoods are handled in log space so far-away data cannot underflow.
    The influence is ``h_mu(x) = n - sum_i phi_sigma(Y_i - x) / L_i(mu)``.

    Parameters
    ----------
    data : array_like
        Observations ``Y_i``; nonempty.
    sigma : float
        Noise standard deviation, positive.
    dom : BoxDomain or (a, b)
    """
    dom = interval(dom)
    y = np.atleast_1d(np.asarray(data, dtype=np.float64))
    if y.size == 0:
        raise ValueError("data must be nonempty")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    s = float(sigma)
    n = y.shape[0]

    def log_phi(x):
        """log phi_sigma(Y_i - x_j), shape (n, len(x))."""
        z = (y[:, None] - x[None, :]) / s
        return -0.5 * z * z - _LOG_SQRT_2PI - np.log(s)

    def log_lik(mu):
        with np.errstate(divide="ignore"):
            lw = np.log(mu.weights)
        return logsumexp(log_phi(mu.atoms[:, 0]) + lw[None, :], axis=1)

    def objective_fn(mu):
        return float(-np.sum(log_lik(mu)))

    def influence_fn(mu):
        ll = log_lik(mu)
        return lambda pts: n - np.exp(log_phi(col(pts)) - ll[:, None]).sum(axis=0)

    mu_star = j_star = None
    if n == 1:
        t = float(np.clip(y[0], dom.lower[0], dom.upper[0]))
        mu_star = dirac(t, dom)
        j_star = _LOG_SQRT_2PI + np.log(s) + (y[0] - t) ** 2 / (2 * s * s)
    return ProblemInstance(
        name="deconvolution",
        domain=dom,
        objective_fn=objective_fn,
        influence_fn=influence_fn,
        truth=InstanceTruth(mu_star, j_star, None),
        convexity=CONVEX,
        params={"n": n, "sigma": s},
    )
