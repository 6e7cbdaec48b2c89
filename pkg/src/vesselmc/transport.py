"""Particle motion (diffusion plus axial drift) and flow-regime numbers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .core import FlowKind, FlowProfile, MoleculeSpecies, Particle, VesselGeometry
from .rng import RngStream, draw_normal

_U1, _U2 = np.uint64(1), np.uint64(2)

FLOW_CODES = {FlowKind.NONE: 0, FlowKind.UNIFORM: 1, FlowKind.POISEUILLE: 2}


class FlowRegime(str, enum.Enum):
    POISEUILLE_DOMINATED = "PoiseuilleDominated"
    UNIFORM_DISPERSIVE = "UniformDispersive"
    PURE_DIFFUSION = "PureDiffusion"


class RadialOutOfRange(ValueError):
    pass


class NonPositiveDiffusion(ValueError):
    pass


class ZeroPeclet(ValueError):
    pass


@dataclass(frozen=True)
class DimensionlessReport:
    peclet: float
    dispersion_factor: float | None  # undefined for pure diffusion
    regime: FlowRegime

    def to_dict(self) -> dict:
        return {"peclet": self.peclet, "dispersion_factor": self.dispersion_factor, "regime": self.regime.value}


@nb.njit(cache=True, inline="always", error_model="numpy")
def axial_velocity(flow_code, mean_velocity, radial, radius):
    if flow_code == 1:
        return mean_velocity
    if flow_code == 2:
        q = radial / radius
        return 2.0 * mean_velocity * (1.0 - q * q)
    return 0.0


def velocity_at(flow: FlowProfile, geometry: VesselGeometry, radial_um: float) -> float:
    """Axial velocity at distance ``radial_um`` from the duct axis.

    Poiseuille flow uses the laminar no-slip parabola ``2 v (1 - (r/R)^2)``,
    whose cross-section average is the mean velocity ``v``.
    """
    if not 0.0 <= radial_um <= geometry.radius_um:
        raise RadialOutOfRange(f"radial position {radial_um} outside [0, {geometry.radius_um}]")
    return float(axial_velocity(FLOW_CODES[flow.kind], flow.mean_velocity_um_s, radial_um, geometry.radius_um))


@nb.njit(cache=True, inline="always", error_model="numpy")
def euler_step(x, y, z, sigma, drift, n1, n2, n3):
    return x + drift + sigma * n1, y + sigma * n2, z + sigma * n3


@nb.njit(cache=True, inline="always", error_model="numpy")
def step_normals(key, counter0):
    # counters counter0 .. counter0 + 2
    c0 = np.uint64(counter0)
    return draw_normal(key, c0), draw_normal(key, c0 + _U1), draw_normal(key, c0 + _U2)


def brownian_step(
    particle: Particle,
    species: MoleculeSpecies,
    flow: FlowProfile,
    geometry: VesselGeometry,
    dt: float,
    rng: RngStream,
) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
    """One Euler-Maruyama step; returns the unresolved segment ``(start, end)``.

    Drift is evaluated at the start position.  Consumes three draws from
    ``rng``.
    """
    if not particle.alive:
        raise ValueError("cannot step a terminal particle")
    start = (particle.axial_um, particle.lateral_y_um, particle.lateral_z_um)
    r = min(math.hypot(start[1], start[2]), geometry.radius_um)
    drift = velocity_at(flow, geometry, r) * dt
    sigma = math.sqrt(2.0 * species.diffusion_um2_s * dt)
    n1, n2, n3 = step_normals(rng.key, rng.counter)
    rng.counter += 3
    end = euler_step(start[0], start[1], start[2], sigma, drift, n1, n2, n3)
    return start, tuple(float(v) for v in end)


def peclet(radius: float, velocity: float, diffusion: float) -> float:
    """Peclet number ``R v / D``."""
    if diffusion <= 0:
        raise NonPositiveDiffusion(f"diffusion coefficient must be > 0, got {diffusion}")
    if radius <= 0 or velocity < 0:
        raise ValueError("radius must be > 0 and velocity >= 0")
    return radius * velocity / diffusion


def dispersion_factor(length: float, peclet_number: float, radius: float) -> float:
    """Dispersion factor ``L / (Pe R)``; below one the radial velocity profile dominates."""
    if peclet_number <= 0:
        raise ZeroPeclet("dispersion factor is undefined without flow")
    if radius <= 0:
        raise ValueError("radius must be > 0")
    return length / (peclet_number * radius)


def classify_flow_regime(
    geometry: VesselGeometry, flow: FlowProfile, species: MoleculeSpecies
) -> DimensionlessReport:
    velocity = flow.mean_velocity_um_s if flow.kind is not FlowKind.NONE else 0.0
    pe = peclet(geometry.radius_um, velocity, species.diffusion_um2_s)
    if pe == 0:
        return DimensionlessReport(0.0, None, FlowRegime.PURE_DIFFUSION)
    alpha = dispersion_factor(geometry.length_um, pe, geometry.radius_um)
    regime = FlowRegime.POISEUILLE_DOMINATED if alpha < 1 else FlowRegime.UNIFORM_DISPERSIVE
    return DimensionlessReport(pe, alpha, regime)
