import math

import numpy as np
import pytest

from probfw.errors import CapabilityError, SolverError
from probfw.harness.experiments import fit_rate
from probfw.instances import (
    build_calibration,
    build_cre,
    build_doptimal,
    build_nn_risk,
    build_pmeans,
    build_response_time_a,
    build_response_time_b,
)
from probfw.measure import AtomicMeasure, dirac
from probfw.solvers import (
    SolverConfig,
    run,
    run_dfw,
    run_fixed_sfw,
    run_fully_corrective,
    run_sfw,
    simplex_reweight,
)


@pytest.fixture(scope="module")
def cal():
    return build_calibration("identity", 0.3)


def test_dfw_hand_trace(cal):
    # means: 0 -> 1 -> 1/3 -> 1/6 -> 1/2 with eta = 1, 2/3, 1/2, 2/5
    t = run_dfw(cal, dirac(0.0, cal.domain), SolverConfig(max_iters=4))
    want = [0.09, 0.49, (1 / 3 - 0.3) ** 2, (1 / 6 - 0.3) ** 2, 0.04]
    assert np.allclose(t.column("objective"), want, atol=1e-14, rtol=0)
    assert [float(r.minimizer[0]) for r in t.rows[1:]] == [1.0, 0.0, 0.0, 1.0]
    assert np.allclose(t.column("eta")[1:], [1.0, 2 / 3, 1 / 2, 2 / 5])
    assert t.column("atoms").tolist() == [1, 1, 2, 2, 2]


def test_unit_step_oscillates(cal):
    cfg = SolverConfig(max_iters=6, step_schedule="fixed", fixed_eta=1.0)
    t = run_dfw(cal, dirac(0.0, cal.domain), cfg)
    assert [float(r.minimizer[0]) for r in t.rows[1:]] == [1.0, 0.0] * 3
    assert np.allclose(t.column("objective"), [0.09, 0.49] * 3 + [0.09])


def test_constant_minimizer_on_response_time_a():
    r = build_response_time_a()
    t = run_dfw(r, dirac(0.0, r.domain), SolverConfig(max_iters=10))
    assert all(abs(float(row.minimizer[0]) - 0.5) <= 1e-9 for row in t.rows[1:])
    # eta_0 = 1 drops the start atom, so every later iterate is delta_{1/2};
    # J has a kink at 1/2, so the subsolver's 1e-9 location error shows up linearly
    assert len(t.final) == 1
    assert t.rows[-1].objective == pytest.approx(r.truth.optimal_value, abs=1e-10)


def test_trace_shape_and_feasibility():
    p = build_pmeans([0.25, 0.75])
    t = run_dfw(p, None, SolverConfig(max_iters=25))
    assert len(t) == 26 and [r.k for r in t.rows] == list(range(26))
    atoms = t.column("atoms")
    assert atoms[0] == 1 and np.all(atoms >= 1) and np.all(np.diff(atoms) <= 1)
    assert abs(t.final.weights.sum() - 1) <= 1e-12 and np.all(t.final.weights >= 0)
    assert np.all(np.isnan(t.column("elapsed_ms")))


def test_nonincreasing_support_without_pruning():
    p = build_pmeans([0.5])
    atoms = run_dfw(p, None, SolverConfig(max_iters=20)).column("atoms")
    assert np.all(np.diff(atoms) >= 0)


def test_sfw_reproducible_and_sample_sizes():
    p = build_pmeans([0.5])
    cfg = SolverConfig(max_iters=12, c_m=0.3, seed=7)
    a, b = run_sfw(p, None, cfg), run_sfw(p, None, cfg)
    assert np.array_equal(a.column("objective"), b.column("objective"))
    assert [r.m for r in a.rows[1:]] == [math.ceil(0.3 * (k + 2) ** 2 - 1e-9) for k in range(12)]
    c = run_sfw(p, None, SolverConfig(max_iters=12, c_m=0.3, seed=8))
    assert not np.array_equal(a.column("objective"), c.column("objective"))


def test_sfw_needs_stochastic_oracle(cal):
    with pytest.raises(CapabilityError):
        run_sfw(cal, None, SolverConfig(max_iters=2))


def test_solver_error_keeps_partial_trace():
    d = build_doptimal()
    with pytest.raises(SolverError) as info:
        run_dfw(d, dirac(0.0, d.domain), SolverConfig(max_iters=5))
    assert info.value.trace is not None and len(info.value.trace) == 0
    mu0 = AtomicMeasure([-1.0, 0.0, 1.0], [1 / 3] * 3, d.domain)
    # eta_0 = 1 replaces mu_0 by a single Dirac, which is singular
    with pytest.raises(SolverError) as info:
        run_dfw(d, mu0, SolverConfig(max_iters=5))
    assert len(info.value.trace) == 1 and info.value.trace.rows[0].objective == pytest.approx(1.0 / (2 / 3))
    ok = run_dfw(d, mu0, SolverConfig(max_iters=5, step_offset=1.0))
    assert len(ok) == 6


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(variant="nope")
    with pytest.raises(ValueError):
        SolverConfig(step_schedule="fixed")
    with pytest.raises(ValueError):
        SolverConfig(variant="fixed_sfw")
    with pytest.raises(ValueError):
        SolverConfig(c_m=0.0)
    assert SolverConfig(step_offset=1.0).eta(0) == pytest.approx(2 / 3)


def test_simplex_reweight_examples(cal):
    w, info = simplex_reweight(cal, [[0.0], [1.0]], [0.5, 0.5])
    assert np.allclose(w, [0.7, 0.3], atol=1e-9)
    w1, _ = simplex_reweight(cal, [[0.4]], [1.0])
    assert w1.tolist() == [1.0]
    # three atoms, a unique optimum mixes only the neighbours of 0.3
    w3, _ = simplex_reweight(cal, [[0.0], [0.5], [1.0]], [1 / 3] * 3)
    assert float(w3 @ np.array([0.0, 0.5, 1.0])) == pytest.approx(0.3, abs=1e-8)


def test_fully_corrective_calibration_exact(cal):
    t = run_fully_corrective(cal, dirac(0.0, cal.domain), SolverConfig(max_iters=3))
    assert t.rows[1].objective <= 1e-18
    assert dict(zip(t.final.atoms[:, 0].round(12), t.final.weights.round(9))) == {0.0: 0.7, 1.0: 0.3}


def test_fully_corrective_not_worse_than_plain():
    for inst in (build_pmeans([0.25, 0.75]), build_response_time_b(), build_nn_risk()):
        plain = run_dfw(inst, None, SolverConfig(max_iters=20)).rows[-1].objective
        fc = run_fully_corrective(inst, None, SolverConfig(max_iters=20)).rows[-1].objective
        assert fc <= plain + 1e-12


def test_fully_corrective_finds_cre_optimum():
    c = build_cre(1.0, 2.0)
    t = run_fully_corrective(c, None, SolverConfig(max_iters=15))
    assert t.rows[-1].objective == pytest.approx(-1 / math.e, abs=1e-8)
    got = dict(zip(t.final.atoms[:, 0].round(6), t.final.weights))
    assert got[2.0] == pytest.approx(1 / math.e, abs=1e-6)


def test_dfw_rate_on_smooth_instances():
    for inst in (build_pmeans([0.25, 0.75]), build_response_time_b(), build_nn_risk()):
        g = run_dfw(inst, None, SolverConfig(max_iters=200)).column("obj_gap")
        fit = fit_rate(np.arange(1, len(g)), g[1:])
        assert fit.exact_at is None and fit.slope <= -0.9


def test_dfw_calibration_rate_ignores_isolated_zero(cal):
    # the mean oscillates around y0 and hits it exactly once near k = 44
    g = run_dfw(cal, dirac(0.0, cal.domain), SolverConfig(max_iters=1000)).column("obj_gap")
    assert np.any(g[1:] <= 1e-12) and g[-1] > 0
    fit = fit_rate(np.arange(1, len(g)), g[1:])
    assert fit.exact_at is None and fit.slope <= -0.9


def test_fully_corrective_exact_convergence_branch(cal):
    for inst, mu0 in ((build_pmeans([0.5]), None), (cal, dirac(0.0, cal.domain))):
        g = run_fully_corrective(inst, mu0, SolverConfig(max_iters=12)).column("obj_gap")
        fit = fit_rate(np.arange(1, len(g)), g[1:])
        assert fit.exact_at is not None and fit.exact_at <= 3
        assert "exact convergence" in fit.describe()


def test_fit_rate_errors_and_tail_rule():
    with pytest.raises(ValueError):
        fit_rate(np.arange(1, 6), np.ones(5))
    assert fit_rate(np.arange(1, 11), [1, 2, 0, 0, 0, 0, 0, 0, 0, 0]).exact_at == 3
    ks = np.arange(1, 21)
    fit = fit_rate(ks, 3.0 / ks)
    assert fit.slope == pytest.approx(-1.0) and fit.intercept == pytest.approx(math.log(3.0))


def test_sfw_gap_shrinks_on_average():
    p = build_pmeans([0.5])
    d16, d64 = [], []
    for s in range(10):
        g = run_sfw(p, None, SolverConfig(max_iters=64, seed=s, c_m=0.1)).column("obj_gap")
        d16.append(g[16])
        d64.append(g[64])
    assert np.mean(d64) <= np.mean(d16)


def test_fixed_step_plateau():
    p = build_pmeans([0.5])
    cfg = SolverConfig(max_iters=300, step_schedule="fixed", sample_schedule="fixed", fixed_eta=0.05, fixed_m=20)
    g = run_fixed_sfw(p, None, cfg).column("obj_gap")
    early, late = g[50:100].mean(), g[250:300].mean()
    assert late > 0.01 and late >= 0.5 * early


def test_fixed_sfw_inexact_audits():
    p = build_pmeans([0.5])
    cfg = SolverConfig(max_iters=30, fixed_eta=0.1, fixed_m=8, epsilon_tilde=0.05, audit_every=5,
                       step_schedule="fixed", sample_schedule="fixed")
    t = run_fixed_sfw(p, None, cfg)
    audits = t.meta["audits"]
    assert [k for k, _ in audits] == [0, 5, 10, 15, 20, 25]
    assert all(v >= 0 for _, v in audits)


def test_generic_run_dispatch(cal):
    a = run(cal, dirac(0.0, cal.domain), SolverConfig(variant="dfw", max_iters=5))
    b = run_dfw(cal, dirac(0.0, cal.domain), SolverConfig(max_iters=5))
    assert np.array_equal(a.column("objective"), b.column("objective"))
