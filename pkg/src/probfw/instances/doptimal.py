"""D-optimal experimental design on an interval."""
import numpy as np

from ..errors import SingularDesignError
from ..measure import AtomicMeasure
from ..oracle import CONVEX, InstanceTruth, ProblemInstance
from ._common import col, interval

_RCOND = 1e-12


def polynomial_basis(degree):
    """Monomials ``1, x, ..., x^degree`` as a vectorized feature map."""

    def feats(x):
        x = np.asarray(x, dtype=np.float64)
        return x[:, None] ** np.arange(degree + 1)

    feats.degree = degree
    return feats


def _factor(mu, feats):
    fx = feats(mu.atoms[:, 0])
    m = (fx * mu.weights[:, None]).T @ fx
    evals = np.linalg.eigvalsh(m)
    if evals[0] <= _RCOND * max(evals[-1], 1e-300):
        raise SingularDesignError(
            f"information matrix is singular (eigenvalues {evals.tolist()}); J = +inf"
        )
    chol = np.linalg.cholesky(m)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return chol, logdet


def _known_optimum(degree, dom):
    a, b = dom.lower[0], dom.upper[0]
    if degree == 1:
        mu = AtomicMeasure([a, b], [0.5, 0.5], dom)
    elif degree == 2:
        mu = AtomicMeasure([a, 0.5 * (a + b), b], [1 / 3, 1 / 3, 1 / 3], dom)
    else:
        return None
    return mu


def linear_model_smoothness(dom, var_floor):
    """Smoothness constant of ``mu -> h_mu`` for the basis ``(1, x)``.

    Valid on any set of measures whose variance is at least ``var_floor``;
    variance is concave along mixtures, so the floor over a run's iterates
    covers every segment between consecutive iterates.
    """
    a, b = float(dom.lower[0]), float(dom.upper[0])
    w = b - a
    m1 = max(abs(a), abs(b))
    sq = np.array([a * a, b * b] + ([0.0] if a < 0 < b else []))
    q = sq.max() - sq.min()
    v = float(var_floor)
    dv = 1.0 / v**2 + 2.0 * w * w / v**3
    return dv * (q + 2.0 * m1 * w) + 2.0 * w * w / v**2


def build_doptimal(basis=None, dom=(-1.0, 1.0)):
    """D-optimal design ``J(mu) = 1 / det M(mu)`` with ``M = int f f^T dmu``.

    Parameters
    ----------
    basis : callable or int, optional
        Feature map ``x -> (n, p)`` array, or a polynomial degree. Defaults
        to the linear model ``(1, x)``.
    dom : BoxDomain or (a, b)

    Notes
    -----
    ``J`` is infinite at singular designs, so it is only smooth on sets of
    measures bounded away from singularity. For the linear model the
    instance exposes ``local_smoothness(measures)``.
    """
    dom = interval(dom)
    if basis is None:
        basis = 1
    feats = polynomial_basis(int(basis)) if isinstance(basis, (int, np.integer)) else basis
    degree = getattr(feats, "degree", None)
    p = feats(np.zeros(1)).shape[1]

    def objective_fn(mu):
        _, logdet = _factor(mu, feats)
        return float(np.exp(-logdet))

    def influence_fn(mu):
        chol, logdet = _factor(mu, feats)
        scale = np.exp(-logdet)
        linv = np.linalg.inv(chol)
        # f^T M^{-1} f = |L^{-1} f|^2
        q = linv.T @ linv

        def h(pts):
            fx = feats(col(pts))
            return (p - np.einsum("ij,jk,ik->i", fx, q, fx)) * scale

        return h

    mu_star = _known_optimum(degree, dom) if degree is not None else None
    j_star = objective_fn(mu_star) if mu_star is not None else None
    if degree == 1:
        j_star = 4.0 / (dom.upper[0] - dom.lower[0]) ** 2

    local = None
    if degree == 1:

        def local(measures):
            floor = min(float(mu.weights @ (mu.atoms[:, 0] - mu.mean()[0]) ** 2) for mu in measures)
            return linear_model_smoothness(dom, floor)

    return ProblemInstance(
        name="doptimal",
        domain=dom,
        objective_fn=objective_fn,
        influence_fn=influence_fn,
        truth=InstanceTruth(mu_star, j_star, None),
        convexity=CONVEX,
        local_smoothness=local,
        probe_support=None if mu_star is None else mu_star.atoms.copy(),
        params={"basis_dim": p, "degree": degree},
    )
