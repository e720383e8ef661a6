"""Finitely supported probability measures on a compact box."""
import numpy as np

from . import kernels
from .errors import DegenerateMeasureError, DomainError

ATOM_TOL = 1e-9
_SUM_TOL = 1e-9


def as_points(x, d):
    """Coerce ``x`` to a float array of shape ``(n, d)``.

    Scalars and 1-d arrays are accepted for ``d == 1``; a 1-d array of
    length ``d`` is treated as a single point when ``d > 1``.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if d == 1 else arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {np.shape(x)}")
    return arr


class BoxDomain:
    """Axis-aligned box ``[lower, upper]`` in ``R^d``.

    Parameters
    ----------
    lower, upper : array_like
        Corner coordinates with ``lower[i] < upper[i]`` for every ``i``.
    """

    def __init__(self, lower, upper):
        lo = np.atleast_1d(np.asarray(lower, dtype=np.float64)).copy()
        hi = np.atleast_1d(np.asarray(upper, dtype=np.float64)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be 1-d and of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box corners must be finite")
        if np.any(lo >= hi):
            raise ValueError("box needs lower < upper in every coordinate")
        lo.flags.writeable = False
        hi.flags.writeable = False
        self.lower = lo
        self.upper = hi

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def diameter(self):
        return float(np.linalg.norm(self.upper - self.lower))

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    def _slack(self):
        return 1e-12 * np.maximum(1.0, np.maximum(np.abs(self.lower), np.abs(self.upper)))

    def contains(self, x):
        """Boolean mask of points inside the closed box (boundary included)."""
        pts = as_points(x, self.dim)
        s = self._slack()
        return np.all((pts >= self.lower - s) & (pts <= self.upper + s), axis=1)

    def clip(self, x):
        return np.clip(as_points(x, self.dim), self.lower, self.upper)

    def grid(self, per_dim):
        """Uniform tensor grid with ``per_dim`` points per axis, shape (n, d)."""
        axes = [np.linspace(a, b, per_dim) for a, b in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def __eq__(self, other):
        return (
            isinstance(other, BoxDomain)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))

    def __reduce__(self):
        return (BoxDomain, (self.lower, self.upper))

    def __repr__(self):
        if self.dim == 1:
            return f"BoxDomain([{self.lower[0]:g}, {self.upper[0]:g}])"
        return f"BoxDomain({self.lower.tolist()}, {self.upper.tolist()})"


class AtomicMeasure:
    """Probability measure ``sum_i w_i delta_{x_i}`` on a box.

    Instances are immutable: ``atoms`` and ``weights`` are read-only arrays.

    Parameters
    ----------
    atoms : array_like, shape (n, d) or (n,) when d == 1
    weights : array_like, shape (n,)
        Nonnegative, summing to one within 1e-9; renormalized on entry.
    domain : BoxDomain
    """

    __slots__ = ("atoms", "weights", "domain")

    def __init__(self, atoms, weights, domain):
        pts = as_points(atoms, domain.dim).copy()
        w = np.asarray(weights, dtype=np.float64).ravel().copy()
        if pts.shape[0] != w.shape[0]:
            raise ValueError("atoms and weights differ in length")
        if w.shape[0] == 0:
            raise DegenerateMeasureError("a probability measure needs at least one atom")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        total = w.sum()
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"weights sum to {total!r}, not 1")
        w /= total
        if not np.all(domain.contains(pts)):
            bad = pts[~domain.contains(pts)][0]
            raise DomainError(f"atom {bad.tolist()} lies outside {domain!r}")
        pts = domain.clip(pts)
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "atoms", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "domain", domain)

    @classmethod
    def _trusted(cls, atoms, weights, domain):
        """Build without validation; for inner loops on already-checked data."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "atoms", atoms)
        object.__setattr__(obj, "weights", weights)
        object.__setattr__(obj, "domain", domain)
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("AtomicMeasure is immutable")

    def __reduce__(self):
        return (_restore, (np.array(self.atoms), np.array(self.weights), self.domain))

    def __len__(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.domain.dim

    def mean(self):
        return self.weights @ self.atoms

    def __repr__(self):
        n = len(self)
        if n <= 4:
            parts = " + ".join(
                f"{w:.6g}*d{tuple(np.round(a, 6).tolist()) if self.dim > 1 else round(a[0], 6)}"
                for a, w in zip(self.atoms, self.weights)
            )
            return f"AtomicMeasure({parts})"
        return f"AtomicMeasure(<{n} atoms in {self.domain!r}>)"


def _restore(atoms, weights, domain):
    atoms.flags.writeable = False
    weights.flags.writeable = False
    return AtomicMeasure._trusted(atoms, weights, domain)


def _check_same_domain(mu, nu):
    if mu.domain != nu.domain:
        raise ValueError("measures live on different domains")


def dirac(x, dom):
    """Unit point mass at ``x``.

    Raises
    ------
    DomainError
        If ``x`` is outside ``dom``.
    """
    pts = as_points(x, dom.dim)
    if pts.shape[0] != 1:
        raise ValueError("dirac takes a single point")
    return AtomicMeasure(pts, [1.0], dom)


def uniform_on(points, dom):
    """Equal-weight measure on the given points."""
    pts = as_points(points, dom.dim)
    return AtomicMeasure(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]), dom)


def grid_cloud(dom, per_dim):
    """Equal-weight atoms on a uniform grid; a stand-in for the uniform law."""
    return uniform_on(dom.grid(per_dim), dom)


def random_cloud(dom, n, rng):
    """Equal-weight i.i.d. uniform atoms; approximates a continuous ``mu_0``."""
    pts = dom.lower + (dom.upper - dom.lower) * rng.random((n, dom.dim))
    return uniform_on(pts, dom)


def _cluster(points, tol):
    """Cluster labels (in lexicographic order of clusters) and the sort order."""
    order = np.lexsort(points.T[::-1])
    sorted_pts = np.ascontiguousarray(points[order])
    labels = kernels.sweep_labels(sorted_pts, float(tol))
    return order, labels


def _merge(points, weights, tol):
    order, labels = _cluster(points, tol)
    k = int(labels.max()) + 1 if labels.size else 0
    w_sorted = weights[order]
    p_sorted = points[order]
    wsum = np.bincount(labels, weights=w_sorted, minlength=k)
    count = np.bincount(labels, minlength=k)
    if np.all(count == 1):
        return p_sorted, wsum
    loc = np.empty((k, points.shape[1]))
    for j in range(points.shape[1]):
        num = np.bincount(labels, weights=w_sorted * p_sorted[:, j], minlength=k)
        plain = np.bincount(labels, weights=p_sorted[:, j], minlength=k) / count
        with np.errstate(invalid="ignore", divide="ignore"):
            loc[:, j] = np.where(wsum > 0, num / np.where(wsum > 0, wsum, 1.0), plain)
    # keep the first member's coordinates for singletons, bit for bit
    _, first = np.unique(labels, return_index=True)
    single = count == 1
    loc[single] = p_sorted[first[single]]
    return loc, wsum


def consolidate(mu, atom_tol=ATOM_TOL, weight_tol=0.0):
    """Merge nearby atoms and optionally prune light ones.

    Atoms within ``atom_tol`` of each other are merged into one atom at their
    weighted centroid. Atoms lighter than ``weight_tol`` are then dropped and
    the rest renormalized. Both steps repeat until nothing changes.
    Output atoms are in lexicographic order.

    Raises
    ------
    DegenerateMeasureError
        If pruning removes every atom.
    """
    if atom_tol < 0:
        raise ValueError("atom_tol must be nonnegative")
    if not 0 <= weight_tol < 1:
        raise ValueError("weight_tol must lie in [0, 1)")
    pts = np.asarray(mu.atoms)
    w = np.asarray(mu.weights)
    while True:
        n_before = w.shape[0]
        pts, w = _merge(pts, w, atom_tol)
        if weight_tol > 0:
            keep = w >= weight_tol
            if not np.any(keep):
                raise DegenerateMeasureError("pruning removed every atom")
            pts, w = pts[keep], w[keep]
            w = w / w.sum()
        if w.shape[0] == n_before:
            break
    return AtomicMeasure(pts, w / w.sum(), mu.domain)


def mix(mu, nu, t, atom_tol=ATOM_TOL):
    """Convex combination ``(1 - t) mu + t nu``, consolidated.

    Atoms whose weight becomes exactly zero are dropped, so
    ``mix(mu, nu, 1.0)`` is ``nu`` and ``mix(mu, nu, 0.0)`` is ``mu``.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"step t={t!r} outside [0, 1]")
    _check_same_domain(mu, nu)
    pts = np.concatenate([mu.atoms, nu.atoms])
    w = np.concatenate([(1.0 - t) * mu.weights, t * nu.weights])
    keep = w > 0
    pts, w = _merge(pts[keep], w[keep], atom_tol)
    return AtomicMeasure(pts, w / w.sum(), mu.domain)


def tv_distance(mu, nu, atom_tol=ATOM_TOL):
    """Total variation distance ``sup_A |mu(A) - nu(A)|``.

    For atomic measures this is half the L1 distance between weight vectors
    over the union of supports; atoms within ``atom_tol`` count as equal.
    """
    _check_same_domain(mu, nu)
    pts = np.concatenate([mu.atoms, nu.atoms])
    n = len(mu)
    order, labels = _cluster(pts, atom_tol)
    # per-cluster masses summed separately, so tv(mu, mu) is exactly zero
    from_mu = order < n
    size = int(labels.max()) + 1
    wa = np.bincount(labels[from_mu], weights=mu.weights[order[from_mu]], minlength=size)
    wb = np.bincount(labels[~from_mu], weights=nu.weights[order[~from_mu] - n], minlength=size)
    return float(min(1.0, 0.5 * np.abs(wa - wb).sum()))


def ball_mass(mu, center, radius):
    """Mass of the closed Euclidean ball ``B(center, radius)``."""
    r = np.atleast_1d(np.asarray(radius, dtype=np.float64))
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    c = as_points(center, mu.dim)
    out = kernels.ball_mass_table(
        np.ascontiguousarray(mu.atoms), np.ascontiguousarray(mu.weights), c, np.ascontiguousarray(r)
    )
    out = np.minimum(out, 1.0)
    if np.ndim(radius) == 0 and c.shape[0] == 1:
        return float(out[0, 0])
    return out


def expect(mu, f):
    """Integral of ``f`` against ``mu``.

    ``f`` is called once on the ``(n, d)`` atom array and must return ``n``
    values (an ``(n, 1)`` result is accepted too).
    """
    vals = np.asarray(f(mu.atoms), dtype=np.float64)
    if vals.ndim == 0:
        vals = np.full(len(mu), float(vals))
    return float(mu.weights @ vals.reshape(len(mu)))


def to_rows(mu):
    """Rows ``[x_1, ..., x_d, w]`` for CSV export."""
    return [list(map(float, a)) + [float(w)] for a, w in zip(mu.atoms, mu.weights)]


def from_rows(rows, dom):
    arr = np.asarray(rows, dtype=np.float64)
    return AtomicMeasure(arr[:, :-1], arr[:, -1], dom)
