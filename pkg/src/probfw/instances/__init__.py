"""Worked problem instances and a name-based registry."""
from ..oracle import deterministic_wrap
from .calibration import build_calibration, build_nonconvex_calibration
from .cre import build_cre, half_half
from .deconvolution import build_deconvolution
from .doptimal import build_doptimal, linear_model_smoothness, polynomial_basis
from .nn_risk import build_nn_risk
from .pmeans import build_pmeans
from .response_time import build_response_time_a, build_response_time_b

BUILDERS = {
    "calibration": build_calibration,
    "nonconvex": build_nonconvex_calibration,
    "response_time_a": build_response_time_a,
    "response_time_b": build_response_time_b,
    "doptimal": build_doptimal,
    "pmeans": build_pmeans,
    "nn_risk": build_nn_risk,
    "cre": build_cre,
    "deconvolution": build_deconvolution,
}


def build(name, **params):
    """Build an instance by registry name.

    A ``zero_variance=True`` parameter wraps the result with exact
    "stochastic" oracles.
    """
    zero_var = bool(params.pop("zero_variance", False))
    try:
        builder = BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown instance {name!r}; choose from {sorted(BUILDERS)}") from None
    inst = builder(**params)
    return deterministic_wrap(inst) if zero_var else inst


__all__ = [
    "BUILDERS",
    "build",
    "build_calibration",
    "build_cre",
    "build_deconvolution",
    "build_doptimal",
    "build_nn_risk",
    "build_nonconvex_calibration",
    "build_pmeans",
    "build_response_time_a",
    "build_response_time_b",
    "deterministic_wrap",
    "half_half",
    "linear_model_smoothness",
    "polynomial_basis",
]
