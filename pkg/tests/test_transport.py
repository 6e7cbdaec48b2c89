import math

import numpy as np
import pytest
from scipy import integrate

from vesselmc.core import FlowKind, FlowProfile, MoleculeSpecies, Particle, VesselGeometry
from vesselmc.rng import RngStream
from vesselmc.transport import (
    FlowRegime,
    NonPositiveDiffusion,
    RadialOutOfRange,
    ZeroPeclet,
    brownian_step,
    classify_flow_regime,
    dispersion_factor,
    euler_step,
    peclet,
    velocity_at,
)

GEOM = VesselGeometry(30.0, 2000.0)
POIS = FlowProfile(FlowKind.POISEUILLE, 5000.0)
UNIF = FlowProfile(FlowKind.UNIFORM, 5000.0)


def test_poiseuille_centreline_and_wall():
    assert velocity_at(POIS, GEOM, 0.0) == 10000.0
    assert velocity_at(POIS, GEOM, 30.0) == 0.0


def test_uniform_everywhere():
    for r in (0.0, 7.5, 29.9, 30.0):
        assert velocity_at(UNIF, GEOM, r) == 5000.0


def test_no_flow():
    assert velocity_at(FlowProfile(), GEOM, 10.0) == 0.0


def test_radial_out_of_range():
    with pytest.raises(RadialOutOfRange):
        velocity_at(POIS, GEOM, 31.0)
    with pytest.raises(RadialOutOfRange):
        velocity_at(POIS, GEOM, -1.0)


def test_poiseuille_area_average_is_mean_velocity():
    R = GEOM.radius_um
    flux, _ = integrate.quad(lambda r: velocity_at(POIS, GEOM, r) * 2 * math.pi * r, 0, R, epsabs=1e-12)
    assert flux / (math.pi * R**2) == pytest.approx(5000.0, rel=1e-6)


def test_pure_advection_limit():
    sp = MoleculeSpecies(0, 1e-300)
    start, end = brownian_step(Particle(100.0, 0.0, 0.0, 0), sp, UNIF, GEOM, 1e-3, RngStream(1, 1))
    assert end[0] - start[0] == pytest.approx(5.0, abs=1e-12)
    assert end[1] == pytest.approx(0.0, abs=1e-12) and end[2] == pytest.approx(0.0, abs=1e-12)


def test_zero_variates_give_pure_advection():
    x, y, z = euler_step(1.0, 2.0, 3.0, 1.157, 5.0, 0.0, 0.0, 0.0)
    assert (x, y, z) == (6.0, 2.0, 3.0)


def test_wall_particle_has_no_drift_under_poiseuille():
    sp = MoleculeSpecies(0, 1e-300)
    start, end = brownian_step(Particle(100.0, 30.0, 0.0, 0), sp, POIS, GEOM, 1e-3, RngStream(1, 1))
    assert end[0] == pytest.approx(start[0], abs=1e-12)


def test_diffusive_step_variance():
    sp = MoleculeSpecies(0, 670.0)
    n = 100_000
    d = np.empty((n, 3))
    p = Particle(0.0, 0.0, 0.0, 0)
    rng = RngStream(2024, 0)
    for i in range(n):
        s, e = brownian_step(p, sp, FlowProfile(), GEOM, 1e-3, rng)
        d[i] = np.subtract(e, s)
    var = d.var(axis=0)
    assert np.all(np.abs(var / 1.34 - 1) < 0.03)
    # zero mean within 4 standard errors per axis
    assert np.all(np.abs(d.mean(axis=0)) < 4 * math.sqrt(1.34 / n))


def test_peclet_examples():
    assert peclet(30, 5000, 670) == pytest.approx(223.88, abs=0.01)
    assert peclet(30, 0, 670) == 0
    assert peclet(60, 5000, 670) == pytest.approx(447.76, abs=0.01)
    with pytest.raises(NonPositiveDiffusion):
        peclet(30, 5000, 0)


def test_dispersion_examples():
    assert dispersion_factor(2000, 223.88, 30) == pytest.approx(0.2978, abs=0.001)
    assert dispersion_factor(2000, 223.88, 30) == pytest.approx(0.29777, abs=0.00001)
    assert dispersion_factor(4000, 223.88, 30) == pytest.approx(0.5956, abs=0.002)
    pe, R = 123.0, 7.0
    assert dispersion_factor(pe * R, pe, R) == 1.0
    with pytest.raises(ZeroPeclet):
        dispersion_factor(2000, 0.0, 30)


def test_scale_consistency_mm_vs_um():
    pe_um = peclet(30, 5000, 670)
    pe_mm = peclet(0.030, 5.0, 670e-6)
    assert pe_mm == pytest.approx(pe_um, rel=1e-12)
    assert dispersion_factor(2.0, pe_mm, 0.030) == pytest.approx(dispersion_factor(2000, pe_um, 30), rel=1e-12)


def test_regimes():
    sp = MoleculeSpecies(0, 670.0)
    rep = classify_flow_regime(GEOM, UNIF, sp)
    assert rep.regime is FlowRegime.POISEUILLE_DOMINATED
    assert rep.peclet == pytest.approx(223.88, abs=0.01)
    assert classify_flow_regime(GEOM, FlowProfile(), sp).regime is FlowRegime.PURE_DIFFUSION
    long = classify_flow_regime(VesselGeometry(30.0, 1e6), UNIF, sp)
    assert long.regime is FlowRegime.UNIFORM_DISPERSIVE
    assert long.dispersion_factor == pytest.approx(148.9, abs=0.05)
