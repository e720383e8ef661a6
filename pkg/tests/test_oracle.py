import math

import numpy as np
import pytest

from probfw.errors import CapabilityError, OracleError
from probfw.instances import build, build_calibration, build_doptimal, build_pmeans
from probfw.measure import AtomicMeasure, dirac, mix
from probfw.oracle import (
    RngStream,
    clt_constant_samples,
    deterministic_wrap,
    estimate_smoothness,
    fd_influence,
    fw_gap,
    influence,
    influence_or_fd,
    mc_influence,
    mc_influence_fn,
    mc_objective,
    objective,
    random_measure,
    von_mises,
)


@pytest.fixture(scope="module")
def cal():
    return build_calibration("identity", 0.3)


@pytest.fixture(scope="module")
def pm():
    return build_pmeans([0.5])


def test_calibration_influence_at_dirac_zero(cal):
    mu = dirac(0.0, cal.domain)
    xs = np.linspace(0, 1, 11)
    assert np.allclose(influence(cal, mu, xs), -0.6 * xs, atol=1e-15)


def test_doptimal_influence_at_optimum():
    d = build_doptimal()
    mu = AtomicMeasure([-1.0, 1.0], [0.5, 0.5], d.domain)
    xs = np.linspace(-1, 1, 21)
    assert np.allclose(influence(d, mu, xs), 1 - xs**2, atol=1e-14)


def test_objective_examples(cal, pm):
    assert objective(cal, dirac(0.0, cal.domain)) == pytest.approx(0.09, abs=1e-15)
    assert objective(cal, AtomicMeasure([1.0, 0.0], [0.3, 0.7], cal.domain)) == pytest.approx(0.0, abs=1e-15)
    assert objective(pm, dirac(0.5, pm.domain)) == pytest.approx(math.exp(-1), abs=1e-12)


def test_capability_errors(cal):
    mu = dirac(0.2, cal.domain)
    with pytest.raises(CapabilityError):
        mc_influence(cal, mu, 0.3, 10, RngStream(0))
    with pytest.raises(CapabilityError):
        mc_objective(cal, mu, 10, RngStream(0))


def test_mc_influence_consistency(pm):
    mu = AtomicMeasure([0.2, 0.6], [0.4, 0.6], pm.domain)
    x = 0.35
    ys = pm.sampler(RngStream(11, (0, 0)).generator(), 100_000)
    vals = pm.sample_influence_fn(mu, ys)(np.array([[x]]))[0]
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - influence(pm, mu, x)) <= 3 * se


def test_mc_objective_consistency(pm):
    mu = dirac(0.5, pm.domain)
    ys = pm.sampler(RngStream(12, (0, 0)).generator(), 100_000)
    vals = pm.sample_objective_fn(mu, ys)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - math.exp(-1)) <= 3 * se + 1e-15


def test_reproducible_and_single_sample(pm):
    mu = AtomicMeasure([0.2, 0.6], [0.4, 0.6], pm.domain)
    s = RngStream(3, (4, 5))
    assert mc_influence(pm, mu, 0.3, 50, s) == mc_influence(pm, mu, 0.3, 50, s)
    y1 = pm.sampler(s.generator(), 1)
    assert mc_influence(pm, mu, 0.3, 1, s) == pytest.approx(pm.sample_influence_fn(mu, y1)(np.array([[0.3]]))[0, 0], abs=1e-15)
    assert mc_objective(pm, mu, 1, s) == pytest.approx(pm.sample_objective_fn(mu, y1)[0], abs=1e-15)


def test_distinct_streams_differ(pm):
    a = pm.sampler(RngStream(1, (0, 0)).generator(), 8)
    b = pm.sampler(RngStream(1, (0, 1)).generator(), 8)
    c = pm.sampler(RngStream(2, (0, 0)).generator(), 8)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)


def test_frozen_sampled_function_is_piecewise_constant(pm):
    mu = AtomicMeasure([0.2, 0.6], [0.4, 0.6], pm.domain)
    s = RngStream(5, (1, 0))
    h_m = mc_influence_fn(pm, mu, 20, s)
    x = np.array([[0.3], [0.7]])
    assert np.array_equal(h_m(x), h_m(x))
    ys = pm.sampler(s.generator(), 20)
    brk = np.unique(np.clip(np.concatenate([[0.0, 1.0], 0.5 - ys, 0.5 + ys]), 0, 1))
    for lo, hi in zip(brk[:-1], brk[1:]):
        if hi - lo < 1e-9:
            continue
        inside = np.linspace(lo, hi, 7)[1:-1][:, None]
        vals = h_m(inside)
        assert np.ptp(vals) <= 1e-12


def test_sampled_function_mean_is_unbiased(pm):
    mu = AtomicMeasure([0.1, 0.8], [0.5, 0.5], pm.domain)
    x = np.array([[0.45]])
    vals = np.array([mc_influence_fn(pm, mu, 16, RngStream(9, (0, r)))(x)[0] for r in range(4000)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - influence(pm, mu, 0.45)) <= 3 * se


def test_mean_fast_path_matches_full_oracle(pm):
    mu = AtomicMeasure([0.1, 0.55, 0.8], [0.2, 0.5, 0.3], pm.domain)
    ys = pm.sampler(RngStream(4, (0, 0)).generator(), 300)
    x = np.linspace(0, 1, 101)[:, None]
    full = pm.sample_influence_fn(mu, ys)(x).mean(axis=1)
    fast = pm.mean_sample_influence_fn(mu, ys)(x)
    assert np.allclose(full, fast, atol=1e-13)


def test_fd_influence_and_fallback(cal):
    mu = AtomicMeasure([0.1, 0.9], [0.5, 0.5], cal.domain)
    # J along the mixture is quadratic in t, so the error is exactly linear in t
    exact = influence(cal, mu, 0.7)
    e1 = fd_influence(cal, mu, 0.7, 1e-2) - exact
    e2 = fd_influence(cal, mu, 0.7, 1e-3) - exact
    assert e2 == pytest.approx(e1 / 10, rel=1e-6)
    with pytest.raises(ValueError):
        fd_influence(cal, mu, 0.7, 0.0)
    no_h = build_calibration()
    from dataclasses import replace

    bare = replace(no_h, influence_fn=None)
    h = influence_or_fd(bare, mu, 1e-6)
    assert h(np.array([[0.7]]))[0] == pytest.approx(exact, abs=1e-5)


def test_von_mises_and_zero_mean(cal):
    mu = AtomicMeasure([0.1, 0.9], [0.25, 0.75], cal.domain)
    assert von_mises(cal, mu, mu) == pytest.approx(0.0, abs=1e-15)
    nu = dirac(0.4, cal.domain)
    t = 1e-6
    fd = (objective(cal, mix(mu, nu, t)) - objective(cal, mu)) / t
    assert von_mises(cal, mu, nu) == pytest.approx(fd, abs=1e-5)


def test_fw_gap(cal):
    assert fw_gap(cal, dirac(0.0, cal.domain)) == pytest.approx(0.6, abs=1e-12)
    assert fw_gap(cal, cal.truth.optimal_measure) == pytest.approx(0.0, abs=1e-15)


def test_random_measure_contains_probe_support():
    d = build_doptimal()
    mu = random_measure(d, np.random.default_rng(0))
    for a in d.probe_support:
        assert np.any(np.all(np.isclose(mu.atoms, a), axis=1))


def test_deterministic_wrap(cal):
    z = deterministic_wrap(cal)
    mu = AtomicMeasure([0.1, 0.9], [0.25, 0.75], cal.domain)
    assert z.params["zero_variance"] and z.is_stochastic
    assert mc_objective(z, mu, 7, RngStream(0)) == objective(cal, mu)
    assert mc_influence(z, mu, 0.3, 7, RngStream(0)) == pytest.approx(influence(cal, mu, 0.3), abs=1e-15)
    draws = clt_constant_samples(z, mu, 16, 5, RngStream(0))
    assert np.all(draws == 0.0)


def test_smoothness_estimate_below_analytic(cal):
    est = estimate_smoothness(cal, RngStream(0), pairs=100, inflate=1.0)
    assert 0 < est <= cal.truth.smoothness_L


def test_non_finite_sample_raises(pm):
    from dataclasses import replace

    bad = replace(pm, sample_objective_fn=lambda mu, ys: np.full(len(ys), np.nan))
    with pytest.raises(OracleError):
        mc_objective(bad, dirac(0.5, pm.domain), 5, RngStream(0))


def test_pmeans_unbiasedness_z_scores_are_standard_normal(pm):
    # many independent z-tests: their empirical distribution, not any single
    # extreme value, is what separates a biased oracle from chance
    from probfw.harness.experiments import unbiasedness_tests

    zi, zo = [], []
    for i in range(30):
        infl, obj = unbiasedness_tests(pm, 10, 4000, RngStream(99, (0, i)))
        zi += [z for _, z in infl]
        zo += [z for _, z in obj]
    for z in (np.array(zi), np.array(zo)):
        assert abs(z.mean()) <= 3.0 / math.sqrt(z.size)
        assert 0.8 <= z.var() <= 1.2
