"""Monte Carlo channel: duct and free-space impulse responses plus analytic oracles."""

from __future__ import annotations

import math

import numpy as np

from ..core import SimulationScenario, TxPosition, validate_scenario
from .analytic import (
    GeometryError,
    analytic_1d_first_passage,
    analytic_free_space_absorbing_sphere,
    first_passage_cdf,
    inverse_gaussian_mode,
)
from .cir import (
    BinMismatch,
    ChannelImpulseResponse,
    CirStatistics,
    EmptyCir,
    MassLedger,
    bin_events,
    cir_statistics,
    ledger_from_events,
    tail_fraction,
)
from .engine import ParticleBatch, ParticleEvents, emission_point, make_batch, run_batch, simulate_events

DEFAULT_BIN_STEPS = 10

__all__ = [
    "BinMismatch",
    "ChannelImpulseResponse",
    "CirStatistics",
    "EmptyCir",
    "GeometryError",
    "MassLedger",
    "ParticleBatch",
    "ParticleEvents",
    "analytic_1d_first_passage",
    "analytic_free_space_absorbing_sphere",
    "bin_events",
    "cir_statistics",
    "default_bin_width",
    "emission_point",
    "first_passage_cdf",
    "inverse_gaussian_mode",
    "ledger_from_events",
    "make_batch",
    "matched_free_space",
    "run_batch",
    "simulate_cir",
    "simulate_events",
    "simulate_free_space_cir",
    "simulate_free_space_events",
    "tail_fraction",
]


def default_bin_width(dt: float) -> float:
    return DEFAULT_BIN_STEPS * dt


def simulate_cir(
    scenario: SimulationScenario,
    *,
    workers: int = 1,
    bin_width_s: float | None = None,
    species_id: int | None = None,
    tx: TxPosition | None = None,
    chemistry: bool = True,
) -> tuple[ChannelImpulseResponse, MassLedger]:
    """Release one impulse of ``molecules_per_emission`` molecules and bin the absorptions.

    The output depends only on ``(scenario, seed)``; ``workers`` changes
    wall-clock time, never the result.
    """
    validate_scenario(scenario)
    events = simulate_events(scenario, workers=workers, species_id=species_id, tx=tx, chemistry=chemistry)
    bw = bin_width_s or default_bin_width(scenario.time_step_s)
    cir = bin_events(events, bw, scenario.end_time_s, scenario.digest())
    return cir, ledger_from_events(events)


def simulate_free_space_events(
    tx_point,
    receiver_center,
    receiver_radius: float,
    diffusion: float,
    n: int,
    dt: float,
    end_time_s: float,
    *,
    seed: int = 0,
    velocity: float = 0.0,
    workers: int = 1,
) -> ParticleEvents:
    """Unbounded-medium counterpart of the duct run (no walls, valves or caps).

    ``velocity`` adds a uniform drift along +x; zero gives the pure-diffusion
    channel matching :func:`analytic_free_space_absorbing_sphere`.
    """
    n = int(n)
    batch = ParticleBatch(
        x=np.full(n, float(tx_point[0])),
        y=np.full(n, float(tx_point[1])),
        z=np.full(n, float(tx_point[2])),
        release_step=np.zeros(n, dtype=np.int64),
        diffusion=np.full(n, float(diffusion)),
        decay=np.zeros(n),
        species_id=np.zeros(n, dtype=np.int64),
        source=np.zeros(n, dtype=np.int64),
    )
    receivers = (
        np.array([float(receiver_center[0])]),
        np.array([float(receiver_center[1])]),
        np.array([float(receiver_center[2])]),
        np.array([float(receiver_radius)]),
    )
    return run_batch(batch, seed=seed, dt=dt, end_time_s=end_time_s, free_space_receivers=receivers,
                     free_space_velocity=velocity, workers=workers)  # fmt: skip


def simulate_free_space_cir(
    tx_point,
    receiver_center,
    receiver_radius: float,
    diffusion: float,
    n: int,
    dt: float,
    end_time_s: float,
    *,
    seed: int = 0,
    velocity: float = 0.0,
    bin_width_s: float | None = None,
    workers: int = 1,
) -> ChannelImpulseResponse:
    events = simulate_free_space_events(
        tx_point, receiver_center, receiver_radius, diffusion, n, dt, end_time_s,
        seed=seed, velocity=velocity, workers=workers,
    )  # fmt: skip
    return bin_events(events, bin_width_s or default_bin_width(dt), end_time_s)


def matched_free_space(
    scenario: SimulationScenario, *, receiver: int = 0, workers: int = 1, with_flow: bool = True
) -> ChannelImpulseResponse:
    """Free-space CIR at the duct run's Tx-Rx distance and receiver size.

    Uses the duct's emission point and receiver centre unchanged, so the
    straight-line distance matches; with ``with_flow`` the mean velocity is
    kept as a uniform drift.
    """
    validate_scenario(scenario)
    rx = scenario.receivers[receiver]
    sp = scenario.species[0]
    velocity = scenario.flow.mean_velocity_um_s if with_flow else 0.0
    return simulate_free_space_cir(
        emission_point(scenario),
        rx.center(scenario.geometry.radius_um),
        rx.radius_um,
        sp.diffusion_um2_s,
        scenario.molecules_per_emission,
        scenario.time_step_s,
        scenario.end_time_s,
        seed=scenario.seed,
        velocity=velocity,
        workers=workers,
    )


def tx_receiver_distance(scenario: SimulationScenario, receiver: int = 0) -> float:
    p = emission_point(scenario)
    c = scenario.receivers[receiver].center(scenario.geometry.radius_um)
    return math.dist(p, c)
