import json
import math

import numpy as np
import pytest

from harmsync.analysis import max_pairwise
from harmsync.coupling import example_network
from harmsync.harness import (ConfigError, InitialCondition, Scenario, averaging_scaling_study,
                              bundled_config, bundled_configs, default_horizon, load_scenario,
                              omega_sweep, run_scenario, sample_ball)

BASE = {
    "name": "t",
    "p": 4,
    "omega": 2.0,
    "couplings": [{"i": 1, "j": 3, "kind": "linear", "gain": 1.0},
                  {"i": 2, "j": 3, "kind": "linear", "gain": 0.25},
                  {"i": 2, "j": 4, "kind": "linear", "gain": 0.75},
                  {"i": 3, "j": 2, "kind": "linear", "gain": 0.75}],
    "initial": {"type": "random", "seed": 1, "radius": 1.0},
    "horizon": 2.0,
    "frames": ["original"],
    "integrator": {"h0": 0.01, "sample_dt": 0.5},
}


def cfg(**changes):
    d = json.loads(json.dumps(BASE))
    d.update(changes)
    return d


# -- config parsing -------------------------------------------------------------------

def test_minimal_config_defaults():
    s = Scenario.from_dict({"p": 2, "omega": 1.0, "couplings": [{"i": 1, "j": 2, "kind": "cubic", "gain": 1}]})
    assert s.H == (0.0, 1.0) and s.frames == ("original",) and s.horizon is None
    assert s.t_end == default_horizon(1.0) == pytest.approx(40 * math.pi)
    assert s.net.edges() == [(0, 1)]


def test_default_horizon_floor():
    assert default_horizon(100.0) == 60.0


@pytest.mark.parametrize("changes,path", [
    (dict(p=0), "p"),
    (dict(p=2.5), "p"),
    (dict(omega=-1.0), "omega"),
    (dict(H=[0, 0]), "H"),
    (dict(H=[1]), "H"),
    (dict(couplings="none"), "couplings"),
    (dict(couplings=[{"i": 1, "j": 1, "kind": "linear", "gain": 1}]), "couplings[0]"),
    (dict(couplings=[{"i": 1, "j": 9, "kind": "linear", "gain": 1}]), "couplings[0].j"),
    (dict(couplings=[{"i": 1, "j": 2, "kind": "linear", "gain": -1}]), "couplings[0]"),
    (dict(couplings=[{"i": 1, "j": 2, "kind": "linear", "gain": 1},
                     {"i": 1, "j": 2, "kind": "cubic", "gain": 1}]), "couplings[1]"),
    (dict(initial={"type": "random", "radius": 1.0}), "initial.seed"),
    (dict(initial={"type": "random", "seed": 1, "radius": 0.0}), "initial.radius"),
    (dict(initial={"type": "explicit", "states": [[0, 0]]}), "initial.states"),
    (dict(initial={"type": "file"}), "initial.type"),
    (dict(horizon=0), "horizon"),
    (dict(frames=["lab"]), "frames"),
    (dict(integrator={"steps_per_period": 5}), "integrator"),
    (dict(integrator={"rate": 5}), "integrator"),
    (dict(quadrature={"rule": "midpoint"}), "quadrature"),
    (dict(colour="blue"), "colour"),
    (dict(name=""), "name"),
])
def test_config_errors_carry_field_path(changes, path):
    with pytest.raises(ConfigError) as info:
        Scenario.from_dict(cfg(**changes))
    assert info.value.path == path
    assert str(info.value).startswith(path)


def test_config_must_be_object():
    with pytest.raises(ConfigError):
        Scenario.from_dict([1, 2])


def test_to_dict_round_trip():
    s = Scenario.from_dict(cfg())
    again = Scenario.from_dict({k: v for k, v in s.to_dict().items() if k != "output"})
    assert again == s
    assert again.config_hash() == s.config_hash()
    assert Scenario.from_dict(cfg(omega=3.0)).config_hash() != s.config_hash()


def test_load_scenario_errors(tmp_path):
    with pytest.raises(ConfigError, match="file not found"):
        load_scenario(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_scenario(bad)


def test_bundled_configs_present_and_valid():
    names = bundled_configs()
    for required in ("paper_example", "disconnected", "linear_baseline", "position_coupling"):
        assert required in names
    for name in names:
        s = load_scenario(bundled_config(name))
        assert s.net.validate() == []
    assert load_scenario("paper_example") == load_scenario(bundled_config("paper_example.json"))
    with pytest.raises(ConfigError):
        bundled_config("nope")


def test_bundled_roles():
    assert load_scenario("paper_example").net == example_network()
    assert load_scenario("position_coupling").H == (1.0, 0.0)
    lin = load_scenario("linear_baseline")
    assert {lin.net[e].kind for e in lin.net.edges()} == {"linear"}


# -- initial conditions -------------------------------------------------------------------

def test_sample_ball_spread():
    rng = np.random.default_rng(0)
    for _ in range(200):
        x = sample_ball(rng, 6, 2.5, 10.0)
        assert max_pairwise(x) <= 5.0
        assert np.linalg.norm(x, axis=1).max() <= 12.5


def test_initial_condition_deterministic():
    ic = InitialCondition("random", seed=3, radius=2.0)
    np.testing.assert_array_equal(ic.realize(4), ic.realize(4))
    assert not np.array_equal(ic.realize(4), InitialCondition("random", seed=4, radius=2.0).realize(4))


def test_explicit_initial_condition():
    s = Scenario.from_dict(cfg(initial={"type": "explicit", "states": [[0, 0], [1, 0], [2, 0], [3, 0]]}))
    np.testing.assert_array_equal(s.initial.realize(4)[:, 0], [0, 1, 2, 3])
    assert s.initial.to_dict()["type"] == "explicit"


# -- single runs ------------------------------------------------------------------------------

def test_run_scenario_outputs(tmp_path):
    s = Scenario.from_dict(cfg(frames=["original", "rotating", "averaged"]))
    result = run_scenario(s, out_dir=tmp_path)
    assert sorted(result.trajectories) == ["averaged", "original", "rotating"]
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["t_averaged.csv", "t_metrics.json", "t_original.csv", "t_rotating.csv"]
    metrics = json.loads((tmp_path / "t_metrics.json").read_text())
    prov = metrics["provenance"]
    assert prov["config_hash"] == s.config_hash() and prov["seed"] == 1
    assert prov["integrator"]["h0"] == 0.01
    assert metrics["connectivity"]["witnesses"] == ["n4"]
    assert set(metrics["frames"]["original"]) >= {"final_dist_to_manifold", "settle_time", "sup_max_pairwise"}


def test_run_scenario_without_writing(tmp_path):
    result = run_scenario(Scenario.from_dict(cfg()), write=False)
    assert result.files == []


def test_run_scenario_is_deterministic(tmp_path):
    s = Scenario.from_dict(cfg(frames=["original", "averaged"]))
    a, b = tmp_path / "a", tmp_path / "b"
    run_scenario(s, out_dir=a)
    run_scenario(load_scenario_from(s), out_dir=b)
    for f in a.iterdir():
        assert f.read_bytes() == (b / f.name).read_bytes()


def load_scenario_from(s):
    return Scenario.from_dict(json.loads(json.dumps(s.source)))


def test_zero_network_is_pure_rotation():
    s = Scenario.from_dict(cfg(couplings=[], horizon=20.0, frames=["original", "rotating"],
                               initial={"type": "random", "seed": 5, "radius": 3.0}))
    result = run_scenario(s, write=False)
    for traj in result.trajectories.values():
        spread = max_pairwise(traj.states)
        assert np.ptp(spread) <= 1e-6
    rot = result.trajectories["rotating"]
    np.testing.assert_array_equal(rot.states[-1], rot.states[0])
    assert result.metrics["connectivity"]["connected"] is False


def test_disconnected_config_keeps_components_apart():
    result = run_scenario(load_scenario("disconnected"), write=False)
    traj = result.trajectories["averaged"]
    gap0 = np.linalg.norm(traj.states[0, 0] - traj.states[0, 2])
    gaps = np.linalg.norm(traj.states[:, :2, None] - traj.states[:, None, 2:], axis=-1).min(axis=(1, 2))
    assert gaps.min() >= 0.5 * gap0
    assert result.metrics["connectivity"]["counterexample"] == ["n1", "n3"]


def test_example_network_averaged_converges():
    s = load_scenario("paper_example")
    s = Scenario.from_dict({**s.source, "frames": ["averaged"]})
    result = run_scenario(s, write=False)
    assert result.metrics["frames"]["averaged"]["final_dist_to_manifold"] <= 1e-6


@pytest.mark.slow
def test_example_network_original_high_omega():
    s = load_scenario("paper_example")
    assert s.omega == 100.0 and s.t_end == 60.0
    s = Scenario.from_dict({**s.source, "frames": ["original"]})
    result = run_scenario(s, write=False)
    assert max_pairwise(result.trajectories["original"].final) <= 0.05


# -- sweeps ------------------------------------------------------------------------------------

def small_sweep_scenario(**changes):
    return Scenario.from_dict(cfg(integrator={"h0": 0.02, "steps_per_period": 32}, **changes))


def test_sweep_linear_net_settles_at_delta():
    report = omega_sweep(small_sweep_scenario(), Delta=2.0, delta=0.05, omegas=[0.5, 1.0, 5.0],
                         eps_grid=[0.05], n_seeds=5, horizon=80.0)
    assert report.omega_star == 0.5
    assert report.clauses["c"]["passing_omegas"] == [0.5, 1.0, 5.0]
    assert all(r["clause_b"] for r in report.runs)
    assert all(max(r["initial_spread"]) <= 2.0 for r in report.runs)
    assert len(report.runs[0]["residuals"]) == 5


def test_sweep_trivial_when_threshold_exceeds_spread():
    s = small_sweep_scenario(couplings=[])
    report = omega_sweep(s, Delta=1.0, delta=0.5, omegas=[1.0, 2.0], eps_grid=[1.5], n_seeds=5,
                         horizon=5.0)
    for run in report.runs:
        assert run["settle_times"]["1.5"] == [0.0] * 5
        assert run["clause_c"]


def test_sweep_report_provenance_and_determinism():
    s = small_sweep_scenario()
    kw = dict(Delta=2.0, delta=0.1, omegas=[1.0, 2.0], n_seeds=3, horizon=10.0)
    a, b = omega_sweep(s, **kw), omega_sweep(s, **kw)
    assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)
    prov = a.provenance
    assert prov["config_hash"] == s.config_hash() and prov["n_seeds"] == 3 and prov["sweep_seed"] == 1
    assert a.eps_grid == [0.2]
    assert all(r >= 0 for r in a.residuals)


def test_sweep_records_blow_up():
    s = Scenario.from_dict(cfg(couplings=[{"i": 1, "j": 2, "kind": "cubic", "gain": 1000.0},
                                          {"i": 2, "j": 1, "kind": "cubic", "gain": 1000.0}],
                               p=2, integrator={"h0": 0.05, "steps_per_period": 20}))
    report = omega_sweep(s, Delta=10.0, delta=0.1, omegas=[1.0], n_seeds=2, horizon=5.0)
    run = report.runs[0]
    assert run["residual"] == math.inf and run["blowup_time"] > 0
    assert report.omega_star is None


@pytest.mark.parametrize("kw", [dict(omegas=[]), dict(omegas=[2.0, 1.0]), dict(Delta=0.05),
                                dict(delta=0.0), dict(eps_grid=[0.01]), dict(n_seeds=0)])
def test_sweep_argument_errors(kw):
    args = dict(Delta=1.0, delta=0.1, omegas=[1.0], n_seeds=1, horizon=1.0)
    args.update(kw)
    with pytest.raises(ValueError):
        omega_sweep(small_sweep_scenario(), **args)


# -- averaging error study -----------------------------------------------------------------------

def test_scaling_study_zero_coupling():
    s = Scenario.from_dict(cfg(couplings=[]))
    study = averaging_scaling_study(s, [25.0, 50.0, 100.0], horizon=2.0, sample_dt=0.5)
    assert [r["error"] for r in study["rows"]] == [0.0, 0.0, 0.0]
    assert study["slope"] is None


def test_scaling_study_needs_two_points():
    with pytest.raises(ValueError):
        averaging_scaling_study(Scenario.from_dict(cfg()), [25.0])


@pytest.mark.slow
def test_scaling_study_single_doubling():
    s = load_scenario("avg_error_linear")
    study = averaging_scaling_study(s, [25.0, 50.0], horizon=10.0)
    e25, e50 = (r["error"] for r in study["rows"])
    assert 0.3 <= e50 / e25 <= 0.7
    assert study["provenance"]["config_hash"] == s.config_hash()
