import math

import numpy as np
import pytest

import oracles as orc
from probfw.errors import DomainError, SingularDesignError
from probfw.instances import (
    BUILDERS,
    build,
    build_calibration,
    build_cre,
    build_deconvolution,
    build_doptimal,
    build_nn_risk,
    build_nonconvex_calibration,
    build_pmeans,
    build_response_time_a,
    build_response_time_b,
    half_half,
)
from probfw.measure import AtomicMeasure, BoxDomain, dirac
from probfw.oracle import fw_gap, influence, objective

# fixed probe measures on [0, 1], mapped affinely onto other intervals
PROBES = [
    ([0.5], [1.0]),
    ([0.1, 0.8], [0.3, 0.7]),
    ([0.05, 0.4, 0.62, 0.97], [0.1, 0.2, 0.3, 0.4]),
]
XS = [0.0, 0.23, 0.5, 0.77, 1.0]


def _on(a, b):
    return [([a + (b - a) * x for x in atoms], w) for atoms, w in PROBES], [a + (b - a) * x for x in XS]


CASES = {
    "calibration": (build_calibration(), lambda at, w: orc.calibration_J(at, w), 0.0, 1.0),
    "response_time_a": (build_response_time_a(), lambda at, w: orc.response_a_J(at, w), 0.0, 1.0),
    "response_time_b": (build_response_time_b(), lambda at, w: orc.response_b_J(at, w), 0.0, 1.0),
    "doptimal": (build_doptimal(), lambda at, w: orc.doptimal_J(at, w), -1.0, 1.0),
    "pmeans": (build_pmeans([0.5]), lambda at, w: orc.pmeans_J(at, w, [0.5], 1.0), 0.0, 1.0),
    "pmeans2": (build_pmeans([0.25, 0.75]), lambda at, w: orc.pmeans_J(at, w, [0.25, 0.75], 1.0), 0.0, 1.0),
    "nn_risk": (build_nn_risk(), lambda at, w: orc.nn_risk_J(at, w), -1.0, 1.0),
    "cre": (build_cre(1.0, 2.0), lambda at, w: orc.cre_J(at, w), 1.0, 2.0),
    "deconvolution": (build_deconvolution((0.0,), 1.0), lambda at, w: orc.deconvolution_J(at, w), -1.0, 1.0),
}


@pytest.mark.parametrize("key", sorted(CASES))
def test_objective_matches_independent_integral(key):
    inst, ref, a, b = CASES[key]
    probes, _ = _on(a, b)
    for atoms, w in probes:
        if key == "doptimal" and len(atoms) == 1:
            continue
        mu = AtomicMeasure(atoms, w, inst.domain)
        assert objective(inst, mu) == pytest.approx(ref(atoms, w), rel=1e-9, abs=1e-11)


@pytest.mark.parametrize("key", sorted(CASES))
def test_influence_matches_mixture_derivative(key):
    inst, ref, a, b = CASES[key]
    probes, xs = _on(a, b)
    for atoms, w in probes:
        if key == "doptimal" and len(atoms) == 1:
            continue
        if key == "cre":
            # beyond the last atom the derivative is -inf; probes keep b in the support
            atoms, w = atoms + [b], [wi * 0.9 for wi in w] + [0.1]
        mu = AtomicMeasure(atoms, w, inst.domain)
        for x in xs:
            want = orc.mixture_derivative(ref, atoms, w, x)
            assert influence(inst, mu, x) == pytest.approx(want, rel=1e-4, abs=1e-5)


# ---- frozen values


def test_calibration_values():
    cal = build_calibration("identity", 0.3)
    assert cal.truth.smoothness_L == pytest.approx(3.4)
    mu2 = AtomicMeasure([1.0, 0.0], [1 / 3, 2 / 3], cal.domain)
    assert objective(cal, mu2) == pytest.approx((1 / 3 - 0.3) ** 2, abs=1e-15)
    with pytest.raises(ValueError):
        build_calibration("identity", 1.5)


def test_pmeans_values():
    p = build_pmeans([0.5])
    assert objective(p, dirac(0.0, p.domain)) == pytest.approx(orc.pmeans_J([0.0], [1.0], [0.5], 1.0), abs=1e-12)
    assert objective(p, dirac(0.0, p.domain)) == pytest.approx(0.5 + 0.5 * math.exp(-1), abs=1e-12)
    p2 = build_pmeans([0.25, 0.75])
    star = p2.truth.optimal_measure
    assert objective(p2, star) == pytest.approx(orc.pmeans_J(star.atoms[:, 0], star.weights, [0.25, 0.75], 1.0), abs=1e-10)
    with pytest.raises(DomainError):
        build_pmeans([1.5])


def test_pmeans_two_dimensional():
    dom = BoxDomain([0.0, 0.0], [1.0, 1.0])
    p = build_pmeans([[0.5, 0.5]], dom)
    mu = dirac([0.5, 0.5], dom)
    assert objective(p, mu) == pytest.approx(dom.diameter * math.exp(-1), rel=1e-12)


def test_response_time_b_values():
    r = build_response_time_b()
    assert objective(r, dirac(0.5, r.domain)) == pytest.approx(1 / 6, abs=1e-14)
    assert objective(r, AtomicMeasure([0.25, 0.75], [0.5, 0.5], r.domain)) == pytest.approx(1 / 24, abs=1e-14)


def test_response_time_a_minimizer_is_center():
    r = build_response_time_a()
    assert r.truth.optimal_value == pytest.approx(50.5 / 201, abs=1e-12)
    assert objective(r, dirac(0.5, r.domain)) == pytest.approx(orc.response_a_J([0.5], [1.0]), abs=1e-14)


def test_cre_half_half_is_not_optimal():
    c = build_cre(1.0, 2.0)
    hh = half_half(1.0, 2.0)
    assert objective(c, hh) == pytest.approx(-math.log(2) / 2, abs=1e-14)
    # the influence at half-half is not constant on its support: it is not a stationary point
    h = influence(c, hh, np.array([1.0, 2.0]))
    assert abs(h[0] - h[1]) > 0.1
    assert objective(c, c.truth.optimal_measure) == pytest.approx(-1 / math.e, abs=1e-14)
    assert objective(c, c.truth.optimal_measure) < objective(c, hh)


def test_doptimal_singular_and_optimum():
    d = build_doptimal()
    with pytest.raises(SingularDesignError):
        objective(d, dirac(0.0, d.domain))
    assert d.truth.optimal_value == pytest.approx(1.0)
    q = build_doptimal(2)
    assert objective(q, q.truth.optimal_measure) == pytest.approx(27 / 4, rel=1e-12)


def test_deconvolution_values():
    d = build_deconvolution((0.0,), 1.0)
    xs = np.linspace(-1, 1, 9)
    assert np.allclose(influence(d, dirac(0.0, d.domain), xs), 1 - np.exp(-xs**2 / 2), atol=1e-14)
    far = build_deconvolution((60.0,), 1.0)
    assert np.isfinite(objective(far, dirac(0.0, far.domain)))


def test_nonconvex_gap_at_zero():
    n = build_nonconvex_calibration()
    assert fw_gap(n, dirac(0.0, n.domain)) == pytest.approx(2 * 0.3 - 2 * 0.3**3, abs=1e-12)


def test_nn_risk_rejects_asymmetric_kernel():
    with pytest.raises(ValueError):
        build_nn_risk(U=lambda a, b: np.add.outer(a, 2 * b))


@pytest.mark.parametrize("name", sorted(BUILDERS))
def test_optimality_certificate(name):
    inst = build(name)
    star = inst.truth.optimal_measure
    if star is None:
        pytest.skip("no known optimal measure")
    pts = inst.domain.grid(1025)
    h = inst.influence_fn(star)
    assert h(pts).min() >= -1e-8
    assert np.abs(h(star.atoms)).max() <= 1e-6


def test_registry_zero_variance_flag():
    z = build("calibration", zero_variance=True)
    assert z.params["zero_variance"] and z.name.endswith("+exact_samples")
    with pytest.raises(ValueError):
        build("nope")
