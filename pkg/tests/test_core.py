import json
import math

import numpy as np
import pytest
from scipy import stats

from vesselmc.core import (
    FlowKind,
    Particle,
    ParticleState,
    ReceiverSpec,
    ScenarioError,
    SimulationScenario,
    UnknownParameterPath,
    VesselGeometry,
    WallKind,
    load_scenario,
    normalize_units,
    preset,
    resolution_limit_um,
    save_scenario,
    set_parameter,
    validate_scenario,
    vein_preset,
)
from vesselmc.rng import RngStream, derive_stream, ndtri


def test_vein_preset_accepted(vein):
    assert validate_scenario(vein) is vein
    assert vein.species[0].diffusion_um2_s == 670.0
    assert vein.flow.mean_velocity_um_s == 5000.0
    assert vein.geometry.length_um == 2000.0
    assert vein.geometry.radius_um == 30.0
    assert vein.receivers[0].radius_um == 5.0


def test_zero_radius_is_invalid_geometry(vein):
    bad = vein.replace(geometry=VesselGeometry(0.0, 2000.0))
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(bad)
    assert "InvalidGeometry" in exc.value.kinds


def test_coarse_step_rejected(vein):
    bad = vein.replace(time_step_s=1.0, end_time_s=10.0)
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(bad)
    assert "StepTooCoarse" in exc.value.kinds
    # guard: sqrt(2 D dt) against a / 4
    assert math.sqrt(2 * 670 * 1.0) == pytest.approx(36.6, abs=0.05)
    assert resolution_limit_um(vein) == pytest.approx(5.0 / 4)


def test_every_violation_reported(vein):
    bad = vein.replace(
        geometry=VesselGeometry(0.0, 2000.0),
        receivers=(ReceiverSpec(5000.0, 0.0, 5.0),),
        time_step_s=1.0,
    )
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(bad)
    assert len(exc.value.violations) >= 2
    assert all(v.path for v in exc.value.violations)


def test_receiver_off_duct_is_bad_placement(vein):
    bad = vein.replace(receivers=(ReceiverSpec(2500.0, 0.0, 5.0),))
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(bad)
    assert "BadPlacement" in exc.value.kinds


def test_uniform_flow_needs_no_velocity_when_none(vein):
    sc = set_parameter(vein, "flow.kind", "None")
    sc = set_parameter(sc, "flow.mean_velocity_um_s", 0.0)
    assert sc.flow.kind is FlowKind.NONE
    validate_scenario(sc)


def test_json_round_trip_is_byte_identical(tmp_path, vein):
    text = vein.to_json()
    again = SimulationScenario.from_json(text).to_json()
    assert again == text
    path = save_scenario(vein, tmp_path / "vein.json")
    assert load_scenario(path) == vein
    assert load_scenario(path).digest() == vein.digest()


def test_unit_suffixes_converted():
    data = json.loads(vein_preset().to_json())
    data["flow"].pop("mean_velocity_um_s")
    data["flow"]["mean_velocity_cm_s"] = 0.5
    data["geometry"].pop("length_um")
    data["geometry"]["length_mm"] = 2
    sc = SimulationScenario.from_dict(normalize_units(data))
    assert sc.flow.mean_velocity_um_s == pytest.approx(5000.0)
    assert sc.geometry.length_um == pytest.approx(2000.0)


def test_set_parameter_paths(vein):
    assert set_parameter(vein, "geometry.length_um", 4000).geometry.length_um == 4000
    assert set_parameter(vein, "length_um", 3000).geometry.length_um == 3000
    leaky = set_parameter(vein, "leak_probability", 0.2)
    assert leaky.wall.kind is WallKind.PERMEABLE and leaky.wall.leak_probability == 0.2
    with pytest.raises(UnknownParameterPath):
        set_parameter(vein, "geometry.width_um", 1)


def test_presets_listed_and_valid():
    for name in ("vein", "capillary", "artery-distal"):
        validate_scenario(preset(name))
    with pytest.raises(KeyError):
        preset("aorta")


def test_terminal_states_are_absorbing():
    p = Particle(0.0, 0.0, 0.0, 0)
    p.terminate(ParticleState.ABSORBED, 0.5)
    for other in (ParticleState.LEAKED, ParticleState.ALIVE, ParticleState.DEGRADED):
        with pytest.raises((RuntimeError, ValueError)):
            p.terminate(other, 0.6)
    assert p.state is ParticleState.ABSORBED and p.event_time_s == 0.5


# ---------------------------------------------------------------- rng


def test_stream_repeatable():
    a = derive_stream(42, 0).uniform(100)
    b = derive_stream(42, 0).uniform(100)
    assert np.array_equal(a, b)


def test_distinct_streams_differ():
    a = derive_stream(42, 0).uniform(8)
    b = derive_stream(42, 1).uniform(8)
    assert np.all(a != b)


def test_normal_moments():
    x = derive_stream(42, 7).normal(10**6)
    assert abs(x.mean()) < 0.005
    assert abs(x.var() - 1.0) < 0.01


def test_uniform_range_and_ks():
    u = derive_stream(3, 9).uniform(200_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert stats.kstest(u, "uniform").statistic < 0.005


def test_normal_ks():
    x = derive_stream(11, 2).normal(200_000)
    assert stats.kstest(x, "norm").statistic < 0.005


def test_bernoulli_mean():
    b = derive_stream(5, 5).bernoulli(0.3, 100_000)
    assert abs(b.mean() - 0.3) < 0.005


def test_scalar_draws_advance_counter():
    s = RngStream(1, 2)
    first = s.uniform()
    assert s.counter == 1
    assert first == RngStream(1, 2).uniform(1)[0]


def test_ndtri_matches_scipy():
    p = np.concatenate([np.linspace(1e-12, 1e-3, 50), np.linspace(0.001, 0.999, 500), 1 - np.logspace(-12, -3, 50)])
    ours = np.array([ndtri(v) for v in p])
    assert np.allclose(ours, stats.norm.ppf(p), rtol=1e-12, atol=1e-12)


def test_child_streams_independent_of_parent_position():
    s = RngStream(9, 0)
    c1 = s.child(3).uniform(4)
    s.uniform(10)
    c2 = s.child(3).uniform(4)
    assert np.array_equal(c1, c2)
    assert not np.array_equal(c1, s.child(4).uniform(4))
