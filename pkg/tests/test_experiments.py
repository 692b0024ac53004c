import numpy as np
import pytest

from coneflow.errors import ParameterError
from coneflow.experiments import (SCENARIOS, Scenario, bump, restrict_run,
                                  run_family_uniform, run_one_sided,
                                  synthetic_expander_run)
from coneflow.geometry import GridSpec


def test_bump_shape():
    r = np.linspace(0.0, 10.0, 1001)
    b = bump(r, 2.0, 5.0)
    assert b[0] == pytest.approx(2.0)
    assert np.all(b[r >= 5.0] == 0.0)
    assert np.all(b >= 0.0)
    # C^1 at the support edge: slope vanishes approaching r = 5
    i = np.searchsorted(r, 5.0)
    edge_slope = (b[i - 1] - b[i - 2]) / (r[1] - r[0])
    assert abs(edge_slope) < 0.05


def test_synthetic_run_values(profile21):
    spec = GridSpec.uniform(2, 0.0, 20.0, 101)
    times = [0.5, 1.0, 1.5]
    run = synthetic_expander_run(profile21, spec, times, lambda t: t + 1.0,
                                 offset=0.25)
    snap = run.at_time(1.0)
    want = np.sqrt(2.0) * profile21.evaluate(spec.nodes / np.sqrt(2.0)) + 0.25
    assert np.allclose(snap.values, want)
    with pytest.raises(ParameterError):
        synthetic_expander_run(profile21, spec, [0.0], lambda t: t)


def test_restrict_run(profile21):
    spec = GridSpec.uniform(2, 0.0, 20.0, 101)
    run = synthetic_expander_run(profile21, spec, [0.5, 1.0, 1.5, 2.0],
                                 lambda t: t)
    cut = restrict_run(run, 1.0)
    assert np.allclose(cut.times, [1.0, 1.5, 2.0])
    with pytest.raises(ParameterError):
        restrict_run(run, 5.0)


def test_scenario_registry_complete():
    assert set(SCENARIOS) == {"main-theorem", "one-sided", "family-uniform",
                              "subsolution"}
    for name, sc in SCENARIOS.items():
        assert isinstance(sc, Scenario)
        assert sc.name == name
        assert sc.claim


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_scenarios_pass_in_quick_mode(name):
    rep = SCENARIOS[name].run(quick=True)
    assert rep.passed


def test_one_sided_mode_validation():
    with pytest.raises(ParameterError):
        run_one_sided(mode="bogus", nodes=101, r_max=20.0, horizon=1.0)


def test_family_needs_five_members():
    with pytest.raises(ParameterError):
        run_family_uniform(count=3, horizon=2.0, nodes=201)


def test_family_seed_reproducible():
    a = run_family_uniform(horizon=3.0, nodes=201, r_max=20.0, seed=11)
    b = run_family_uniform(horizon=3.0, nodes=201, r_max=20.0, seed=11)
    assert np.array_equal(a.family_trace, b.family_trace)
    assert a.t_uniform == b.t_uniform
