import numpy as np
import pytest
from hypothesis import given, strategies as st

from coneflow.analysis import (Ball, C1Function, bv_norm,
                               clearing_out_experiment, clearing_out_scaling,
                               decay_fit, default_threshold,
                               graph_area_bound_check, sup_diff)
from coneflow.cones import ConeProfile
from coneflow.errors import ParameterError
from coneflow.geometry import GridFunction, GridSpec


def _gf(values, r_max=1.0):
    spec = GridSpec.uniform(2, 0.0, r_max, len(values))
    return GridFunction(spec, np.asarray(values, dtype=float))


# -- sup_diff ----------------------------------------------------------------

def test_sup_diff_basic():
    u = _gf(np.linspace(0.0, 2.0, 9))
    v = _gf(np.full(9, 0.5))
    assert sup_diff(u, v) == pytest.approx(1.5)


def test_sup_diff_region_interval():
    spec = GridSpec.uniform(2, 0.0, 10.0, 101)
    u = GridFunction(spec, spec.nodes.copy())
    z = GridFunction(spec, np.zeros(101))
    assert sup_diff(u, z, region=(0.0, 5.0)) == pytest.approx(5.0)
    with pytest.raises(ParameterError):
        sup_diff(u, z, region=(20.0, 30.0))  # empty region


def test_sup_diff_grid_mismatch():
    with pytest.raises(ParameterError):
        sup_diff(_gf(np.zeros(9)), _gf(np.zeros(10)))


finite_vecs = st.lists(st.floats(-100.0, 100.0), min_size=8, max_size=8)


@given(finite_vecs, finite_vecs, finite_vecs)
def test_sup_diff_metric_properties(a, b, c):
    ua, ub, uc = _gf(a), _gf(b), _gf(c)
    dab = sup_diff(ua, ub)
    assert dab >= 0.0
    assert dab == pytest.approx(sup_diff(ub, ua))
    assert sup_diff(ua, ua) == 0.0
    assert dab <= sup_diff(ua, uc) + sup_diff(uc, ub) + 1e-12


# -- decay_fit ---------------------------------------------------------------

def test_decay_fit_recovers_power_law():
    t = np.linspace(2.0, 40.0, 30)
    fit = decay_fit(t, 3.0 * t ** -0.5)
    assert fit.exponent == pytest.approx(-0.5, abs=1e-10)
    assert fit.constant == pytest.approx(3.0, rel=1e-10)
    assert fit.residual < 1e-12


@given(st.floats(-2.0, -0.1), st.floats(0.1, 10.0))
def test_decay_fit_homogeneity(p, c):
    t = np.linspace(1.0, 20.0, 25)
    fit = decay_fit(t, c * t ** p)
    assert fit.exponent == pytest.approx(p, abs=1e-8)


def test_decay_fit_needs_a_decade():
    t = np.linspace(5.0, 20.0, 10)  # 4x window only
    with pytest.raises(ParameterError):
        decay_fit(t, t ** -1.0)


def test_decay_fit_rejects_nonpositive():
    t = np.linspace(1.0, 20.0, 10)
    d = t ** -1.0
    d[3] = 0.0
    with pytest.raises(ParameterError):
        decay_fit(t, d)


# -- BV norm and the area bound ----------------------------------------------

def test_bv_norm_linear_slice():
    # integral of |u| + |u'| for u = x on [0,1] is 1.5; the origin stencil
    # clamps u'(0) = 0 (even extension), costing half a cell
    for count in (101, 401, 1601):
        spec = GridSpec.uniform(2, 0.0, 1.0, count)
        val = bv_norm(GridFunction(spec, spec.nodes.copy()), (0.0, 1.0))
        assert val == pytest.approx(1.5, abs=0.6 / count)


def test_ball_quadrature_weights():
    ball = Ball(np.array([2.0, -1.0]), 0.7)
    pts, w = ball.quadrature()
    assert w.sum() == pytest.approx(np.pi * 0.49, rel=1e-6)
    assert np.all(np.sqrt(np.sum((pts - ball.center) ** 2, axis=1)) <= 0.7)


def test_c1_function_algebra_and_gradient():
    f = C1Function.gaussian_bumps(2, [[0.0, 0.0]], [2.0], [1.0])
    g = C1Function.gaussian_bumps(2, [[1.0, 0.0]], [-1.0], [0.5])
    s = f + g
    pt = np.array([[0.3, -0.2]])
    assert s.value(pt)[0] == pytest.approx(f.value(pt)[0] + g.value(pt)[0])
    # analytic gradient against central differences
    eps = 1e-6
    for d in range(2):
        e = np.zeros((1, 2))
        e[0, d] = eps
        fd = (s.value(pt + e)[0] - s.value(pt - e)[0]) / (2 * eps)
        assert s.gradient(pt)[0, d] == pytest.approx(fd, abs=1e-6)


def test_default_threshold_decays():
    assert default_threshold(0.0) == pytest.approx(1.0)
    assert default_threshold(3.0) == pytest.approx(0.25)


def test_area_bound_validation():
    k = ConeProfile.radial(2, 1.0)
    u0 = C1Function.from_cone(k)
    x = np.array([3.0, 0.0])
    with pytest.raises(ParameterError):
        graph_area_bound_check(u0, k, x, 1.5, 2.0)  # rho outside (0,1)
    with pytest.raises(ParameterError):
        graph_area_bound_check(u0, k, x, 0.5, 0.5)  # G below the cone slope


def test_area_bound_pass_with_large_bump():
    k = ConeProfile.radial(2, 1.0)
    u0 = C1Function.from_cone(k) + C1Function.gaussian_bumps(
        2, [[3.0, 0.0]], [2.0], [0.8])
    rep = graph_area_bound_check(u0, k, np.array([3.0, 0.0]), 0.5, 1.0)
    assert rep.hypothesis_ok
    assert rep.area > 0.0
    assert rep.passed
    assert rep.area <= rep.bound * (1 + 1e-9)


def test_area_bound_trivial_when_no_excess():
    k = ConeProfile.radial(2, 1.0)
    rep = graph_area_bound_check(C1Function.from_cone(k), k,
                                 np.array([4.0, 0.0]), 0.6, 1.0)
    assert rep.area == 0.0
    assert rep.passed


# -- clearing out ------------------------------------------------------------

def test_clearing_out_validation():
    k = ConeProfile.radial(2, 1.0)
    with pytest.raises(ParameterError):
        clearing_out_experiment(k, height=0.1, rho=0.2)  # starts below level


def test_clearing_out_single_width():
    k = ConeProfile.radial(2, 1.0)
    rep = clearing_out_experiment(k, height=1.2, rho=0.2)
    assert rep.t0 is not None
    assert 0.0 < rep.t0 <= rep.t_cap
    assert rep.passed


def test_clearing_out_scaling_quick():
    out = clearing_out_scaling(ConeProfile.radial(2, 1.0), rhos=(0.1, 0.2))
    assert 1.5 <= out["exponent"] <= 2.5
    assert set(out["t0"]) == {0.1, 0.2}
