"""P-means: place responders to minimize expected total service cost.

``J(mu) = sum_i int_0^u exp(-mu(B(l_i, t))) dt`` where the ``l_i`` are
demand locations and ``u`` is the diameter of the box. Every evaluation is
exact: ``t -> mu(B(l_i, t))`` is a step function with jumps at the
atom-to-demand distances.
"""
import numpy as np

from ..errors import DomainError
from ..measure import AtomicMeasure, as_points, dirac
from ..oracle import CONVEX, InstanceTruth, ProblemInstance


def _coverage(mu, demands):
    """Per demand: sorted atom distances and cumulative ball masses."""
    diff = demands[:, None, :] - mu.atoms[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    order = np.argsort(dist, axis=1, kind="stable")
    dist = np.take_along_axis(dist, order, axis=1)
    cum = np.minimum(np.cumsum(mu.weights[order], axis=1), 1.0)
    return dist, cum


def _ball_mass_at(dist_i, cum_i, t):
    """``mu(B(l_i, t))`` for an array of radii (closed balls)."""
    idx = np.searchsorted(dist_i, t, side="right")
    return np.concatenate([[0.0], cum_i])[idx]


def _profiles(mu, demands, u):
    """Breakpoints in [0, u] and F_i on each segment, per demand."""
    dist, cum = _coverage(mu, demands)
    out = []
    for d_i, c_i in zip(dist, cum):
        brk = np.unique(np.concatenate([[0.0], np.minimum(d_i, u), [u]]))
        f = _ball_mass_at(d_i, c_i, brk[:-1])
        out.append((brk, f, d_i, c_i))
    return out


def build_pmeans(demands=(0.5,), dom=(0.0, 1.0)):
    """P-means instance with exact and Monte Carlo oracles.

    Parameters
    ----------
    demands : array_like
        Demand locations, shape ``(n0, d)`` or ``(n0,)`` in one dimension.
    dom : BoxDomain or (a, b)

    Returns
    -------
    ProblemInstance
        ``Y ~ Uniform(0, u)`` drives the sampled oracles
        ``F(mu, Y) = sum_i u exp(-F_i(Y))`` and
        ``H_mu(x, Y) = sum_i u (F_i(Y) - 1{|l_i - x| <= Y}) exp(-F_i(Y))``
        with ``F_i(Y) = mu(B(l_i, Y))``.

    Raises
    ------
    DomainError
        If a demand lies outside the box.
    """
    from ..measure import BoxDomain

    if not isinstance(dom, BoxDomain):
        dom = BoxDomain(*dom)
    ell = as_points(demands, dom.dim)
    if not np.all(dom.contains(ell)):
        raise DomainError("every demand must lie in the domain")
    u = dom.diameter

    def objective_fn(mu):
        total = 0.0
        for brk, f, _, _ in _profiles(mu, ell, u):
            total += float(np.sum(np.diff(brk) * np.exp(-f)))
        return total

    def influence_fn(mu):
        tails = []
        const = 0.0
        for brk, f, _, _ in _profiles(mu, ell, u):
            seg = np.diff(brk) * np.exp(-f)
            # Tail_i(r) = int_r^u exp(-F_i) is piecewise linear in r
            tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
            tails.append((brk, tail))
            const += float(np.sum(f * seg))

        def h(pts):
            pts = np.asarray(pts, dtype=np.float64)
            out = np.full(pts.shape[0], const)
            for (brk, tail), li in zip(tails, ell):
                r = np.sqrt(np.sum((pts - li) ** 2, axis=1))
                out -= np.interp(r, brk, tail, right=0.0)
            return out

        return h

    def sampler(gen, m):
        return u * gen.random(m)

    def _ball_masses(mu, ys):
        dist, cum = _coverage(mu, ell)
        return np.array([_ball_mass_at(d, c, ys) for d, c in zip(dist, cum)])

    def sample_objective_fn(mu, ys):
        ys = np.asarray(ys, dtype=np.float64)
        return u * np.exp(-_ball_masses(mu, ys)).sum(axis=0)

    def sample_influence_fn(mu, ys):
        ys = np.asarray(ys, dtype=np.float64)
        fb = _ball_masses(mu, ys)
        e = np.exp(-fb)

        def hs(pts):
            pts = np.asarray(pts, dtype=np.float64)
            out = np.zeros((pts.shape[0], ys.shape[0]))
            for i, li in enumerate(ell):
                r = np.sqrt(np.sum((pts - li) ** 2, axis=1))
                inside = (r[:, None] <= ys[None, :]).astype(np.float64)
                out += u * (fb[i][None, :] - inside) * e[i][None, :]
            return out

        return hs

    def mean_sample_influence_fn(mu, ys):
        ys = np.sort(np.asarray(ys, dtype=np.float64))
        m = ys.shape[0]
        fb = _ball_masses(mu, ys)
        e = np.exp(-fb)
        const = u * float(np.sum(fb * e)) / m
        # suffix sums: sum of e_ij over draws with Y_j >= r
        suffix = [np.concatenate([np.cumsum(ei[::-1])[::-1], [0.0]]) for ei in e]

        def hm(pts):
            pts = np.asarray(pts, dtype=np.float64)
            out = np.full(pts.shape[0], const)
            for i, li in enumerate(ell):
                r = np.sqrt(np.sum((pts - li) ** 2, axis=1))
                out -= u * suffix[i][np.searchsorted(ys, r, side="left")] / m
            return out

        return hm

    mu_star = j_star = None
    if ell.shape[0] == 1:
        mu_star = dirac(ell[0], dom)
        j_star = u * np.exp(-1.0)
    elif ell.shape[0] == 2 and np.linalg.norm(ell[0] - ell[1]) > 0:
        gap = float(np.linalg.norm(ell[0] - ell[1]))
        mu_star = AtomicMeasure(ell, [0.5, 0.5], dom)
        j_star = 2.0 * (gap * np.exp(-0.5) + (u - gap) * np.exp(-1.0))

    return ProblemInstance(
        name="pmeans",
        domain=dom,
        objective_fn=objective_fn,
        influence_fn=influence_fn,
        sample_objective_fn=sample_objective_fn,
        sample_influence_fn=sample_influence_fn,
        mean_sample_influence_fn=mean_sample_influence_fn,
        sampler=sampler,
        truth=InstanceTruth(mu_star, j_star, None),
        convexity=CONVEX,
        params={"demands": ell.tolist(), "u": u, "convexity": "assumed"},
    )
