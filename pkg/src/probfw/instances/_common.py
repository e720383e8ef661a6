"""Helpers shared by the instance builders."""
import numpy as np

from ..measure import BoxDomain

_NAMED = {
    "identity": lambda x: x,
    "square": lambda x: x * x,
    "cube": lambda x: x * x * x,
    "sin": np.sin,
    "exp": np.exp,
}


def named_function(f):
    """Resolve a vectorized 1-d function given as a callable or a name."""
    if callable(f):
        return f
    try:
        return _NAMED[f]
    except KeyError:
        raise ValueError(f"unknown function {f!r}; choose from {sorted(_NAMED)}") from None


def interval(dom):
    """Coerce ``(a, b)`` or a 1-d BoxDomain to a BoxDomain."""
    if isinstance(dom, BoxDomain):
        if dom.dim != 1:
            raise ValueError("this instance needs a 1-d interval")
        return dom
    a, b = dom
    return BoxDomain(a, b)


def extremes(f, dom, per=4097):
    """Approximate (argmin, min, argmax, max) of a 1-d function on an interval.

    Dense grid plus endpoints; exact for monotone functions.
    """
    xs = np.linspace(dom.lower[0], dom.upper[0], per)
    v = np.asarray(f(xs), dtype=np.float64)
    i, j = int(np.argmin(v)), int(np.argmax(v))
    return xs[i], v[i], xs[j], v[j]


def col(pts):
    return np.asarray(pts, dtype=np.float64)[:, 0]
