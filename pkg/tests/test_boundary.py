import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vesselmc.boundary import (
    Segment,
    ValveState,
    bridge_hit_probability,
    check_absorption,
    leak_probability_from_permeability,
    resolve_end_caps,
    resolve_valves,
    resolve_wall,
    valve_state,
)
from vesselmc.core import EndCapPolicy, ParticleState, ReceiverSpec, ValveSpec, VesselGeometry, WallKind, WallModel
from vesselmc.rng import RngStream

R = 30.0
GEOM = VesselGeometry(R, 2000.0)
REFLECTIVE = WallModel()


def test_valve_schedule():
    v = ValveSpec(1000.0, 1.0, 0.5, 0.0)
    assert valve_state(v, 0.25) is ValveState.OPEN
    assert valve_state(v, 0.75) is ValveState.CLOSED
    always = ValveSpec(1000.0, 1.0, 1.0, 0.3)
    assert all(valve_state(always, t) is ValveState.OPEN for t in np.linspace(0, 7, 71))
    shifted = ValveSpec(1000.0, 1.0, 0.5, 0.5)
    assert valve_state(shifted, 0.25) is ValveState.CLOSED


def test_absorption_at_sphere_surface():
    rx = ReceiverSpec(500.0, 0.0, 5.0)
    seg = Segment((490.0, R, 0.0), (500.0, R, 0.0))
    which, frac = check_absorption(seg, [rx], R)
    assert which == 0
    assert frac == pytest.approx(0.5, abs=1e-12)


def test_absorption_miss():
    rx = ReceiverSpec(500.0, 0.0, 5.0)
    assert check_absorption(Segment((400.0, 0.0, 0.0), (401.0, 0.0, 0.0)), [rx], R) is None
    assert check_absorption(Segment((400.0, 0.0, 0.0), (401.0, 0.0, 0.0)), [], R) is None


def test_start_inside_receiver_absorbs_at_zero():
    rx = ReceiverSpec(500.0, 0.0, 5.0)
    which, frac = check_absorption(Segment((500.0, R - 1.0, 0.0), (510.0, 0.0, 0.0)), [rx], R)
    assert (which, frac) == (0, 0.0)


def test_earliest_receiver_wins():
    rxs = [ReceiverSpec(520.0, 0.0, 5.0), ReceiverSpec(505.0, 0.0, 5.0)]
    which, frac = check_absorption(Segment((490.0, R, 0.0), (530.0, R, 0.0)), rxs, R)
    assert which == 1
    assert frac == pytest.approx(10 / 40)


def test_reflective_wall_mirror():
    seg = Segment((10.0, 0.0, 0.0), (10.0, R + 2.0, 0.0))
    out = resolve_wall(seg, GEOM, REFLECTIVE, RngStream(0, 0))
    assert out.state is ParticleState.ALIVE
    assert out.position == pytest.approx((10.0, R - 2.0, 0.0))
    assert out.reflected


def test_reflection_off_axis_preserves_radial_excess():
    y, z = (R + 3.0) * math.cos(1.0), (R + 3.0) * math.sin(1.0)
    out = resolve_wall(Segment((5.0, 0.0, 0.0), (5.0, y, z)), GEOM, REFLECTIVE, RngStream(0, 0))
    assert math.hypot(out.position[1], out.position[2]) == pytest.approx(R - 3.0)
    assert math.atan2(out.position[2], out.position[1]) == pytest.approx(1.0)


def test_certain_leak():
    seg = Segment((10.0, 0.0, 0.0), (10.0, R + 2.0, 0.0), t0=1.0, dt=1e-3)
    out = resolve_wall(seg, GEOM, WallModel(WallKind.PERMEABLE, 1.0), RngStream(0, 0))
    assert out.state is ParticleState.LEAKED
    # contact at r = R along the segment, i.e. 30/32 of the way
    assert out.event_time_s == pytest.approx(1.0 + 1e-3 * 30 / 32)


def test_leak_fraction():
    wall = WallModel(WallKind.PERMEABLE, 0.3)
    rng = RngStream(77, 0)
    seg = Segment((10.0, 29.0, 0.0), (10.0, R + 0.5, 0.0))
    n = 100_000
    leaked = sum(resolve_wall(seg, GEOM, wall, rng).state is ParticleState.LEAKED for _ in range(n))
    assert abs(leaked / n - 0.3) < 0.01


def test_inside_segment_passes():
    seg = Segment((10.0, 0.0, 0.0), (11.0, 5.0, 5.0))
    out = resolve_wall(seg, GEOM, REFLECTIVE, RngStream(0, 0))
    assert out.position == (11.0, 5.0, 5.0) and not out.reflected


@settings(max_examples=300, deadline=None)
@given(
    r0=st.floats(0.0, R),
    a0=st.floats(-math.pi, math.pi),
    r1=st.floats(0.0, 4 * R),
    a1=st.floats(-math.pi, math.pi),
)
def test_wall_containment(r0, a0, r1, a1):
    seg = Segment((0.0, r0 * math.cos(a0), r0 * math.sin(a0)), (1.0, r1 * math.cos(a1), r1 * math.sin(a1)))
    out = resolve_wall(seg, GEOM, REFLECTIVE, RngStream(1, 1))
    assert math.hypot(out.position[1], out.position[2]) <= R * (1 + 1e-12)


def test_open_valve_transparent():
    seg = Segment((995.0, 1.0, 2.0), (1005.0, 1.0, 2.0), t0=0.1, dt=1e-3)
    assert resolve_valves(seg, [ValveSpec(1000.0, 1.0, 1.0)]) == seg


def test_closed_valve_mirrors():
    seg = Segment((995.0, 1.0, 2.0), (1005.0, 1.0, 2.0), t0=0.1, dt=1e-3)
    out = resolve_valves(seg, [ValveSpec(1000.0, 1.0, 0.0)])
    assert out.end == (995.0, 1.0, 2.0)


def test_closed_valve_reflection_keeps_length():
    seg = Segment((998.0, 0.0, 0.0), (1003.5, 0.0, 0.0))
    out = resolve_valves(seg, [ValveSpec(1000.0, 1.0, 0.0)])
    assert abs(out.end[0] - 1000.0) == pytest.approx(3.5)


def test_two_closed_valves_trap_between():
    valves = [ValveSpec(1000.0, 1.0, 0.0), ValveSpec(1004.0, 1.0, 0.0)]
    out = resolve_valves(Segment((1001.0, 0.0, 0.0), (1011.0, 0.0, 0.0)), valves)
    assert 1000.0 <= out.end[0] <= 1004.0


def test_duty_half_pass_rate():
    v = [ValveSpec(1000.0, 1.0, 0.5)]
    times = RngStream(5, 5).uniform(10_000) * 100.0
    passed = sum(resolve_valves(Segment((995.0, 0, 0), (1005.0, 0, 0), t0=t, dt=1e-3), v).end[0] > 1000 for t in times)
    assert abs(passed / 10_000 - 0.5) < 0.02


def test_end_caps():
    out = resolve_end_caps(Segment((1.0, 0, 0), (-3.0, 0, 0)), GEOM)
    assert out.position[0] == 3.0
    far = VesselGeometry(R, 2000.0, EndCapPolicy.ABSORB_FAR_END)
    out = resolve_end_caps(Segment((1999.0, 0, 0), (2001.0, 0, 0), t0=2.0, dt=1e-3), far)
    assert out.state is ParticleState.EXITED_END
    assert out.event_time_s == pytest.approx(2.0 + 0.5e-3)
    out = resolve_end_caps(Segment((100.0, 0, 0), (101.0, 0, 0)), far)
    assert out.position == (101.0, 0, 0) and not out.reflected
    # AbsorbFarEnd still reflects at the inlet
    assert resolve_end_caps(Segment((1.0, 0, 0), (-2.0, 0, 0)), far).position[0] == 2.0
    both = VesselGeometry(R, 2000.0, EndCapPolicy.ABSORB_BOTH)
    assert resolve_end_caps(Segment((1.0, 0, 0), (-2.0, 0, 0)), both).state is ParticleState.EXITED_END


def test_bridge_probability_limits():
    assert bridge_hit_probability(0.0, 1.0, 670.0, 1e-3) == 1.0
    assert bridge_hit_probability(1.0, 1.0, 670.0, 1e-3) == pytest.approx(math.exp(-1 / 0.67))
    assert bridge_hit_probability(10.0, 10.0, 670.0, 1e-3) < 1e-60


def test_permeability_mapping():
    p = leak_probability_from_permeability(1.0, 1e-3, 670.0)
    assert p == pytest.approx(math.sqrt(math.pi * 1e-3 / 670.0))
    assert leak_probability_from_permeability(1e6, 1e-3, 670.0) == 1.0
