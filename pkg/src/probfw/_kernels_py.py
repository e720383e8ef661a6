"""Pure-Python reference implementations of the compiled kernels."""
import numpy as np


def sweep_labels(pts, tol):
    """Greedy cluster labels for points already sorted by first coordinate.

    Each point joins the most recent cluster whose representative (first
    member) lies within ``tol``; otherwise it opens a new cluster.
    """
    pts = np.asarray(pts, dtype=np.float64)
    n = pts.shape[0]
    labels = np.empty(n, dtype=np.int64)
    reps = []
    tol2 = tol * tol
    rows = pts.tolist()
    for i in range(n):
        row = rows[i]
        found = False
        for c in range(len(reps) - 1, -1, -1):
            rep = rows[reps[c]]
            if row[0] - rep[0] > tol:
                break
            acc = 0.0
            for u, v in zip(row, rep):
                acc += (u - v) * (u - v)
            if acc <= tol2:
                labels[i] = c
                found = True
                break
        if not found:
            labels[i] = len(reps)
            reps.append(i)
    return labels


def ball_mass_table(atoms, weights, centers, radii):
    """Closed-ball masses, shape (n_centers, n_radii)."""
    atoms = np.asarray(atoms, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    out = np.zeros((centers.shape[0], radii.shape[0]))
    for a, c in enumerate(centers):
        dist = np.sqrt(((atoms - c) ** 2).sum(axis=1))
        order = np.argsort(dist, kind="stable")
        cum = np.concatenate(([0.0], np.cumsum(weights[order])))
        out[a] = cum[np.searchsorted(dist[order], radii, side="right")]
    return out
