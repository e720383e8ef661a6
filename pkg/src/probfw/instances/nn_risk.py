"""Mean-field risk of a two-layer network, as a functional of the neuron law."""
import numpy as np

from ..measure import dirac
from ..oracle import CONVEX, InstanceTruth, ProblemInstance
from ._common import interval


def gaussian_bump(center=0.3):
    def v(theta):
        return -np.exp(-((theta - center) ** 2) / 2.0)

    return v


def rbf_kernel(theta, theta2):
    return np.exp(-np.subtract.outer(theta, theta2) ** 2 / 2.0)


def build_nn_risk(V=None, U=None, c0_const=0.0, dom=(-1.0, 1.0), check_pairs=64):
    """``J(mu) = c0 + int V dmu + 1/2 int int U dmu dmu``.

    The influence is ``h_mu(x) = V(x) + int U(x, .) dmu + c`` with ``c``
    chosen so that ``h_mu`` integrates to zero against ``mu``.

    Parameters
    ----------
    V : callable, optional
        Vectorized potential; defaults to ``-exp(-(x - 0.3)^2 / 2)``.
    U : callable, optional
        ``U(a, b)`` returning the ``(len(a), len(b))`` matrix; symmetric and
        positive semidefinite. Defaults to the unit RBF kernel.
    c0_const : float
    dom : BoxDomain or (a, b)

    Raises
    ------
    ValueError
        If ``U`` is visibly asymmetric on sampled pairs.
    """
    dom = interval(dom)
    default = V is None and U is None
    V = V or gaussian_bump(0.3)
    U = U or rbf_kernel
    c0 = float(c0_const)

    probe = np.random.default_rng(0).uniform(dom.lower[0], dom.upper[0], size=check_pairs)
    um = np.asarray(U(probe, probe))
    if not np.allclose(um, um.T, rtol=1e-10, atol=1e-12):
        raise ValueError("interaction kernel U must be symmetric")

    def parts(mu):
        x = mu.atoms[:, 0]
        w = mu.weights
        lin = float(w @ V(x))
        quad = float(w @ U(x, x) @ w)
        return lin, quad

    def objective_fn(mu):
        lin, quad = parts(mu)
        return c0 + lin + 0.5 * quad

    def influence_fn(mu):
        x = mu.atoms[:, 0]
        w = mu.weights
        lin, quad = parts(mu)
        shift = -lin - quad
        return lambda pts: V(pts[:, 0]) + U(pts[:, 0], x) @ w + shift

    grid = np.linspace(dom.lower[0], dom.upper[0], 513)
    vg = V(grid)
    ug = U(grid, grid)
    lip = float((vg.max() - vg.min()) + 3.0 * (ug.max() - ug.min()))
    mu_star = j_star = None
    if default and dom.contains(0.3)[0]:
        mu_star = dirac(0.3, dom)
        j_star = c0 - 0.5
    return ProblemInstance(
        name="nn_risk",
        domain=dom,
        objective_fn=objective_fn,
        influence_fn=influence_fn,
        truth=InstanceTruth(mu_star, j_star, lip),
        convexity=CONVEX,
        params={"c0": c0, "default_kernels": default},
    )
