import math

import numpy as np
import pytest

from coneflow.barriers import (HeatSupersolution, ScaledBarrier, Subsolution,
                               assemble_subsolution,
                               evolution_equation_residuals,
                               half_space_experiment, lemma_barrier_flow,
                               psi_identity_residual, scale_barrier,
                               static_barrier_w, wk_difference_fit)
from coneflow.cones import ConeProfile
from coneflow.errors import (CertificationError, DomainError, ParameterError)
from coneflow.flow import FlowRun
from coneflow.geometry import GridFunction, GridSpec

K3 = ConeProfile.radial(3, 1.0)


@pytest.fixture(scope="module")
def lemma_result():
    return lemma_barrier_flow(K3, points=300, lagrangian_points=120,
                              lagrangian_steps=100)


# -- static power-law barrier --------------------------------------------------

def test_static_barrier_values_and_derivative():
    sb = static_barrier_w(K3, 0.5, points=200)
    assert np.allclose(sb.w, sb.r - sb.r ** -0.5)
    # derivative field against central differences of the closed form
    eps = 1e-6
    mid = sb.r[50]
    fd = ((mid + eps - (mid + eps) ** -0.5)
          - (mid - eps - (mid - eps) ** -0.5)) / (2 * eps)
    assert sb.w_r[50] == pytest.approx(fd, rel=1e-8)


def test_static_barrier_certified_region():
    sb = static_barrier_w(K3, 0.5)
    assert sb.r0 is not None
    assert sb.r0 <= 1.0 + 1e-12
    assert np.all(sb.H[sb.r >= sb.r0] > 0.0)


def test_static_barrier_flat_background_fails_far_out():
    # against a plane, a steep power dip turns mean-concave at large radius
    sb = static_barrier_w(ConeProfile.radial(3, 0.0), 2.0,
                          require_mean_convex=False)
    assert sb.r0 is None
    assert not sb.certified


def test_wk_difference_fit_closed_form():
    out = wk_difference_fit(K3, 0.5)
    fit = out["fit"]
    assert out["predicted_exponent"] == pytest.approx(-2.5)
    # alpha [(n-1) - (alpha+1)/(1+beta^2)] = 0.5 * (2 - 0.75)
    assert out["predicted_coefficient"] == pytest.approx(0.625)
    assert fit.exponent == pytest.approx(-2.5, abs=1e-3)
    assert fit.constant == pytest.approx(0.625, rel=1e-3)


# -- flowing barrier -----------------------------------------------------------

def test_lemma_barrier_certificates(lemma_result):
    res = lemma_result
    assert res.passed
    assert res.min_gap > 0.0            # stays strictly below the cone
    assert res.H_min > 0.0              # mean convex on the certified region
    assert res.deficit_fit.exponent == pytest.approx(-0.5, abs=0.1)
    assert res.deficit_monotone
    assert res.r_cut >= 10.0            # inflow collar excluded


def test_lemma_barrier_rejects_bad_setups():
    with pytest.raises(ParameterError):
        lemma_barrier_flow(ConeProfile.radial(2, 1.0))  # needs n >= 3
    with pytest.raises(ParameterError):
        lemma_barrier_flow(K3, r_inner=10.0, r_outer=20.0)  # too shallow
    with pytest.raises(ParameterError):
        lemma_barrier_flow(ConeProfile.radial(3, 0.0))  # not mean convex


def test_zero_speed_barrier_is_static():
    res = lemma_barrier_flow(K3, points=200, f_scale=0.0,
                             lagrangian_points=60, lagrangian_steps=40)
    drift = np.max(np.abs(res.path.levels[-1] - res.path.levels[0]))
    assert drift == 0.0
    assert res.passed is None
    with pytest.raises(CertificationError):
        res.scaled(2.0)


def test_evolution_equations_against_lagrangian(lemma_result):
    out = evolution_equation_residuals(lemma_result.lagrangian, t_stride=10)
    for group in ("metric", "second_form", "mean_curvature", "a_squared",
                  "normal"):
        assert out[group] <= 1e-2
    assert math.isfinite(out["a_evolution_ratio"])
    assert out["a_evolution_ratio"] <= 10.0
    assert out["levels_sampled"] >= 3


def test_evolution_residuals_shrink_under_refinement(lemma_result):
    coarse = evolution_equation_residuals(lemma_result.lagrangian,
                                          t_stride=10)
    fine_run = lemma_barrier_flow(K3, points=600, lagrangian_points=240,
                                  lagrangian_steps=200)
    fine = evolution_equation_residuals(fine_run.lagrangian, t_stride=20)
    assert fine["max"] < coarse["max"] / 2.0


# -- rescaling and the glued subsolution ---------------------------------------

def test_scale_barrier_exact_homothety(lemma_result):
    b = lemma_result.b_final
    lam = 2.5
    scaled = scale_barrier(b, lam)
    assert np.allclose(scaled.spec.nodes, lam * b.spec.nodes)
    assert np.allclose(scaled.values, lam * b.values)


def test_scaled_barrier_domain_guard(lemma_result):
    sc = ScaledBarrier.from_result(lemma_result, 2.0)
    lo, hi = sc.domain
    mid = 0.5 * (lo + hi)
    inside = sc.evaluate(np.array([mid]))
    assert np.isfinite(inside[0])
    with pytest.raises(DomainError):
        sc.evaluate(np.array([hi * 1.5]))


def test_scaled_barrier_homogeneity(lemma_result):
    one = ScaledBarrier.from_result(lemma_result, 1.0)
    two = ScaledBarrier.from_result(lemma_result, 2.0)
    r = np.linspace(one.domain[0] * 1.05, one.domain[1] * 0.95, 40)
    assert np.allclose(two.evaluate(2.0 * r), 2.0 * one.evaluate(r),
                       rtol=1e-10, atol=1e-12)


def test_subsolution_invariants(lemma_result, profile31):
    sc = ScaledBarrier.from_result(lemma_result, 1.0)
    with pytest.raises(ParameterError):
        assemble_subsolution(profile31, sc, m=sc.m1 * 1.5, delta=0.1, R=5.0)
    with pytest.raises(ParameterError):
        assemble_subsolution(profile31, sc, m=0.2, delta=0.1,
                             R=sc.R1 * 1.5)
    with pytest.raises(ParameterError):
        assemble_subsolution(profile31, sc, m=0.2, delta=-0.1, R=5.0)


def test_subsolution_time_zero_is_shifted_cone(lemma_result, profile31):
    sub = assemble_subsolution(profile31, ScaledBarrier.from_result(
        lemma_result, 1.0), m=0.2, delta=0.1, R=5.0)
    r = np.linspace(0.0, 30.0, 61)
    vals = sub.evaluate(r, 0.0)
    shifted_cone = r - 0.2
    # outside the barrier's reach the t=0 trace is exactly cone - m
    assert np.all(vals >= shifted_cone - 1e-12)
    with pytest.raises(DomainError):
        sub.evaluate(r, -0.5)


def test_subsolution_is_pointwise_max(lemma_result, profile31):
    sub = assemble_subsolution(profile31, ScaledBarrier.from_result(
        lemma_result, 1.0), m=0.2, delta=0.1, R=5.0)
    lo, hi = sub.barrier.domain
    r = np.linspace(lo * 1.1, hi * 0.9, 101)
    t = 0.25
    vals = sub.evaluate(r, t)
    expander_branch = sub._expander_branch(r, t)
    barrier_branch = sub.barrier.evaluate(r) - sub.delta / 2.0
    assert np.allclose(vals, np.maximum(expander_branch, barrier_branch))


def test_subsolution_residual_report(lemma_result, profile31):
    sub = assemble_subsolution(profile31, ScaledBarrier.from_result(
        lemma_result, 1.0), m=0.2, delta=0.1, R=5.0)
    spec = GridSpec.uniform(3, 0.0, 0.8 * sub.barrier.domain[1], 501)
    rep = sub.residual_report(spec, np.linspace(0.1, 1.0, 4))
    assert rep["subsolution_ok"]
    assert rep["barrier_min_H"] > 0.0


# -- heat-kernel majorant and the density identity ------------------------------

def test_heat_supersolution_shapes():
    sup = HeatSupersolution(n=2, a=3.0, epsilon=0.05)
    x = np.linspace(0.0, 10.0, 11)
    z = np.zeros(11)
    phi = sup.phi(x, z, 1.0)
    assert np.all(phi > 0.0)
    assert np.all(np.diff(phi) <= 0.0)  # radially decreasing
    spec = GridSpec.uniform(2, 0.0, 10.0, 11)
    u = GridFunction(spec, np.zeros(11))
    assert np.all(sup.majorant(u, 1.0) >= 0.05)
    with pytest.raises(DomainError):
        sup.psi(x, z, 0.0)


def _constant_run(c, spec, times):
    run = FlowRun()
    for t in times:
        run.record_snapshot(float(t),
                            GridFunction(spec, np.full_like(spec.nodes, c)))
    return run


def test_psi_identity_plane_closed_form():
    spec = GridSpec.uniform(2, 0.0, 10.0, 201)
    times = np.arange(1.0, 2.0 + 1e-12, 1e-3)
    rep = psi_identity_residual(_constant_run(3.0, spec, times))
    assert rep.sup_residual <= 1e-4


def test_psi_identity_input_validation():
    spec = GridSpec.uniform(2, 0.0, 10.0, 101)
    with pytest.raises(ParameterError):
        psi_identity_residual(_constant_run(1.0, spec, [1.0, 1.1]))
    with pytest.raises(DomainError):
        psi_identity_residual(_constant_run(1.0, spec, [0.0, 0.5, 1.0]))
    with pytest.raises(ParameterError):
        psi_identity_residual(_constant_run(1.0, spec, [1.0, 1.3, 1.4]))


def test_half_space_majorant_quick():
    rep = half_space_experiment(horizon=10.0, threshold=0.2)
    assert rep.ordering_ok
    assert rep.first_below is not None and rep.first_below <= 10.0
    assert rep.passed
    assert rep.supersolution.a > 0.0
