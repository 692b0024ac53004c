import numpy as np
import pytest

from coneflow.cones import ConeProfile
from coneflow.errors import (GridError, NewtonError, ParameterError,
                             StepFailureError)
from coneflow.expander import evaluate_U
from coneflow.flow import (FlowRun, SolverConfig, comparison_check,
                           detect_t_delta, evolve)
from coneflow.geometry import GridFunction, GridSpec


def _uniform(n, r_max, count):
    return GridSpec.uniform(n, 0.0, r_max, count)


def test_plane_is_stationary():
    spec = _uniform(2, 10.0, 101)
    u0 = GridFunction(spec, np.full(101, 3.0))
    cfg = SolverConfig(dt_init=0.01, dt_max=0.1, snapshot_dt=0.5,
                       boundary="pin-to-initial")
    run = evolve(u0, 2.0, cfg)
    drift = np.max(np.abs(run.final().values - 3.0))
    assert drift < 1e-10


def test_horizon_must_be_positive():
    spec = _uniform(2, 5.0, 51)
    cfg = SolverConfig(dt_init=0.01, dt_max=0.1, snapshot_dt=0.5)
    with pytest.raises(ParameterError):
        evolve(GridFunction(spec, np.zeros(51)), 0.0, cfg)


def test_snapshot_cadence_exact(cone21):
    spec = _uniform(2, 20.0, 201)
    u0 = cone21.on_grid(spec)
    cfg = SolverConfig(dt_init=1e-3, dt_max=0.037, snapshot_dt=0.25,
                       boundary="pin-to-cone")
    run = evolve(u0, 1.0, cfg, cone=cone21)
    assert np.allclose(run.times, np.arange(0.0, 1.0 + 1e-12, 0.25),
                       atol=1e-12)


def test_expander_is_self_similar_coarse(cone21, profile21):
    # scaled-down version of the headline check: evolve U(.,1) for half a
    # unit of time and compare against the exact rescaling
    spec = _uniform(2, 60.0, 601)
    u0 = profile21.on_grid(spec, 1.0)
    cfg = SolverConfig(dt_init=1e-3, dt_max=5e-3, snapshot_dt=0.25,
                       boundary="pin-to-expander")
    run = evolve(u0, 0.5, cfg, cone=cone21, profile=profile21, t_start=1.0)
    err = np.max(np.abs(run.final().values
                        - evaluate_U(profile21, spec.nodes, 1.5)))
    assert err < 5e-3


def test_cone_flow_lifts_origin(cone21, profile21):
    # flowing the cone itself grows a positive cap resembling a sqrt(t)
    spec = _uniform(2, 40.0, 401)
    cfg = SolverConfig(dt_init=1e-4, dt_max=5e-3, snapshot_dt=0.25,
                       boundary="pin-to-expander")
    run = evolve(cone21.on_grid(spec), 1.0, cfg, cone=cone21,
                 profile=profile21)
    center = run.final().values[0]
    assert center > 0.5 * profile21.a  # solver lag keeps it below a exactly
    assert center < 1.05 * profile21.a
    assert np.all(np.asarray(run.min_H) > -1e-10)


def test_boundary_modes_pin_last_node(cone21, profile21):
    spec = _uniform(2, 30.0, 301)
    u0 = cone21.on_grid(spec)
    for boundary, value_at in (
            ("pin-to-initial", lambda t: u0.values[-1]),
            ("pin-to-cone", lambda t: u0.values[-1]),
            ("pin-to-expander",
             lambda t: float(evaluate_U(profile21, spec.nodes[-1:], t)[0]))):
        cfg = SolverConfig(dt_init=1e-3, dt_max=0.01, snapshot_dt=0.2,
                           boundary=boundary)
        run = evolve(u0, 0.4, cfg, cone=cone21, profile=profile21)
        t_end = run.times[-1]
        assert run.final().values[-1] == pytest.approx(value_at(t_end),
                                                       rel=1e-9)


def test_unknown_boundary_rejected():
    with pytest.raises(ParameterError):
        SolverConfig(dt_init=1e-3, dt_max=0.01, snapshot_dt=0.1,
                     boundary="clamp")


def test_newton_breakdown_raises():
    spec = _uniform(2, 10.0, 51)
    u0 = GridFunction(spec, np.ones(51))
    cfg = SolverConfig(dt_init=1.0, dt_max=1.0, dt_min=0.9, adaptive=False,
                       newton_tol=1e-30, newton_max_iter=1, snapshot_dt=1.0)
    with pytest.raises((NewtonError, StepFailureError)):
        evolve(u0, 2.0, cfg, cone=ConeProfile.radial(2, 0.0))


def test_diagnostics_track_profile(cone21, profile21):
    spec = _uniform(2, 20.0, 201)
    cfg = SolverConfig(dt_init=1e-3, dt_max=0.01, snapshot_dt=0.2)
    run = evolve(cone21.on_grid(spec), 0.4, cfg, cone=cone21,
                 profile=profile21)
    assert len(run.step_times) == len(run.sup_u_minus_U)
    assert np.all(np.isfinite(run.sup_u_minus_U))
    assert np.all(np.isfinite(run.sup_u_minus_k))


def test_comparison_check_ordered_pair(cone21):
    spec = _uniform(2, 10.0, 101)
    cfg = SolverConfig(dt_init=1e-2, dt_max=0.05, snapshot_dt=0.5)
    lo = evolve(GridFunction(spec, spec.nodes.copy()), 1.0, cfg, cone=cone21)
    hi = evolve(GridFunction(spec, spec.nodes + 0.5), 1.0, cfg, cone=cone21)
    rep = comparison_check(hi, lo)
    assert bool(rep)
    assert rep.first_violation is None
    assert len(rep.margins) == len(hi.times)
    with pytest.raises(ParameterError):
        comparison_check(lo, hi)  # initial ordering violated


def test_comparison_check_grid_mismatch(cone21):
    cfg = SolverConfig(dt_init=1e-2, dt_max=0.05, snapshot_dt=0.5)
    a = evolve(GridFunction(_uniform(2, 10.0, 101),
                            _uniform(2, 10.0, 101).nodes + 1.0),
               1.0, cfg, cone=cone21)
    b = evolve(GridFunction(_uniform(2, 10.0, 51),
                            _uniform(2, 10.0, 51).nodes.copy()),
               1.0, cfg, cone=cone21)
    with pytest.raises(GridError):
        comparison_check(a, b)


def test_detect_t_delta_semantics(cone21):
    spec = _uniform(2, 10.0, 101)
    k = cone21.on_grid(spec).values
    run = FlowRun()
    # dips 0.30, 0.08, 0.02 below the cone at successive snapshots
    for t, dip in ((0.0, 0.30), (1.0, 0.08), (2.0, 0.02)):
        vals = k - dip * np.exp(-spec.nodes ** 2)
        run.record_snapshot(t, GridFunction(spec, vals))
    assert detect_t_delta(run, cone21, 0.1) == pytest.approx(1.0)
    assert detect_t_delta(run, cone21, 0.05) == pytest.approx(2.0)
    assert detect_t_delta(run, cone21, 0.5) == pytest.approx(0.0)
    assert detect_t_delta(run, cone21, 0.001) is None


def test_at_time_lookup(cone21):
    spec = _uniform(2, 10.0, 101)
    cfg = SolverConfig(dt_init=1e-2, dt_max=0.05, snapshot_dt=0.5)
    run = evolve(cone21.on_grid(spec), 1.0, cfg, cone=cone21)
    snap = run.at_time(0.5)
    assert snap.spec.nodes.size == 101
    with pytest.raises(ParameterError):
        run.at_time(0.31)


def test_polar_evolution_smoke():
    spec = GridSpec.polar_disk(4.0, 24, 16)
    bump = 0.2 * np.cos(2 * spec.thetas)[None, :] * np.exp(-spec.nodes[:, None] ** 2)
    u0 = GridFunction(spec, np.broadcast_to(1.0 + bump, spec.shape).copy())
    cfg = SolverConfig(dt_init=1e-3, dt_max=5e-3, snapshot_dt=0.05,
                       boundary="pin-to-initial")
    run = evolve(u0, 0.1, cfg)
    final = run.final().values
    assert np.all(np.isfinite(final))
    # anisotropy diffuses away: angular oscillation shrinks
    osc0 = np.ptp(u0.values[0])
    osc1 = np.ptp(final[0])
    assert osc1 < osc0
