"""Particle engine.

Each particle is integrated start-to-finish by a jitted kernel.  Its random
numbers come from the counter-based stream ``(seed, particle_index)`` at
counter ``step * SLOTS_PER_STEP + slot``, so the result for a particle does
not depend on which worker ran it or in what order.  Workers are threads
(the kernel releases the GIL) over contiguous index ranges; outputs land in
preallocated per-particle slots.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numba as nb
import numpy as np

from ..boundary import (
    END_CAP_CODES,
    EXITED,
    LEAKED,
    bridge_hit_probability,
    bridge_receiver_nb,
    earliest_hit_nb,
    receiver_arrays,
    resolve_end_caps_nb,
    resolve_valves_nb,
    resolve_wall_nb,
    valve_arrays,
)
from ..chemistry import survives_draw
from ..core import (
    EMISSION_OFFSET_UM,
    SimulationScenario,
    TxPosition,
    WallKind,
    validate_scenario,
)
from ..rng import draw_uniform, stream_key
from ..transport import FLOW_CODES, axial_velocity, euler_step, step_normals

SLOTS_PER_STEP = 16
_SLOT_DEGRADE = 4
_SLOT_WALL = 5  # .. 8, one per wall contact
_SLOT_BRIDGE_RX = 9
_SLOT_BRIDGE_CAP = 10

ALIVE, ABSORBED, LEAKED_CODE, DEGRADED, EXITED_CODE = 0, 1, 2, 3, 4

# Free-space runs with drift: a particle this many diffusion lengths D/v
# downstream of every receiver can no longer return (probability ~ e^-60).
_DRIFT_CUTOFF_LENGTHS = 60.0


@nb.njit(cache=True, nogil=True, error_model="numpy")
def _kernel(
    lo,
    hi,
    seed,
    id_offset,
    px,
    py,
    pz,
    release_step,
    diff,
    decay,
    n_steps,
    dt,
    confined,
    radius,
    length,
    cap_policy,
    flow_code,
    mean_velocity,
    leak_p,
    vx,
    vperiod,
    vopen,
    vphase,
    rcx,
    rcy,
    rcz,
    ra,
    downstream_cutoff,
    chemistry,
    fate,
    t_event,
    receiver,
):
    half_dt = 0.5 * dt
    for i in range(lo, hi):
        key = stream_key(seed, id_offset + i)
        x = px[i]
        y = py[i]
        z = pz[i]
        sigma = math.sqrt(2.0 * diff[i] * dt)
        k = decay[i]
        d_i = diff[i]
        fate[i] = ALIVE
        t_event[i] = -1.0
        receiver[i] = -1
        for step in range(release_step[i], n_steps):
            t0 = step * dt
            c0 = np.uint64(step) * np.uint64(SLOTS_PER_STEP)
            n1, n2, n3 = step_normals(key, c0)
            if confined:
                r = math.sqrt(y * y + z * z)
                if r > radius:
                    r = radius
                drift = axial_velocity(flow_code, mean_velocity, r, radius) * dt
            else:
                drift = axial_velocity(flow_code, mean_velocity, 0.0, 1.0) * dt
            ex, ey, ez = euler_step(x, y, z, sigma, drift, n1, n2, n3)

            which, f = earliest_hit_nb(x, y, z, ex, ey, ez, rcx, rcy, rcz, ra)
            if which >= 0:
                fate[i] = ABSORBED
                t_event[i] = t0 + f * dt
                receiver[i] = which
                break

            reflected = False
            if confined:
                if vx.shape[0] > 0:
                    ex, hit_valve = resolve_valves_nb(x, ex, t0, dt, vx, vperiod, vopen, vphase)
                    reflected = reflected or hit_valve
                status, ey, ez, f, hit_wall = resolve_wall_nb(
                    y, z, ey, ez, radius, leak_p, key, c0 + np.uint64(_SLOT_WALL)
                )
                if status == LEAKED:
                    fate[i] = LEAKED_CODE
                    t_event[i] = t0 + f * dt
                    break
                reflected = reflected or hit_wall
                status, ex, f, hit_cap = resolve_end_caps_nb(x, ex, length, cap_policy)
                if status == EXITED:
                    fate[i] = EXITED_CODE
                    t_event[i] = t0 + f * dt
                    break
                reflected = reflected or hit_cap
                if reflected:
                    which, f = earliest_hit_nb(x, y, z, ex, ey, ez, rcx, rcy, rcz, ra)
                    if which >= 0:
                        fate[i] = ABSORBED
                        t_event[i] = t0 + f * dt
                        receiver[i] = which
                        break
                if cap_policy != 0:
                    # excursions past an absorbing cap between the two endpoints
                    d1 = length - x
                    d2 = length - ex
                    if cap_policy == 2 and x < length - x:
                        d1 = x
                        d2 = ex
                    if d1 * d2 < 40.0 * d_i * dt:
                        u = draw_uniform(key, c0 + np.uint64(_SLOT_BRIDGE_CAP))
                        if u < bridge_hit_probability(d1, d2, d_i, dt):
                            fate[i] = EXITED_CODE
                            t_event[i] = t0 + dt * d1 / (d1 + d2)
                            break
            elif ex > downstream_cutoff:
                fate[i] = EXITED_CODE
                t_event[i] = t0 + dt
                break

            if rcx.shape[0] > 0:
                u = draw_uniform(key, c0 + np.uint64(_SLOT_BRIDGE_RX))
                which = bridge_receiver_nb(x, y, z, ex, ey, ez, rcx, rcy, rcz, ra, d_i, dt, u)
                if which >= 0:
                    fate[i] = ABSORBED
                    t_event[i] = t0 + 0.5 * dt
                    receiver[i] = which
                    break

            if chemistry and k > 0.0:
                u = draw_uniform(key, c0 + np.uint64(_SLOT_DEGRADE))
                if not survives_draw(k, dt, u):
                    fate[i] = DEGRADED
                    t_event[i] = t0 + half_dt
                    break
            x = ex
            y = ey
            z = ez
        px[i] = x
        py[i] = y
        pz[i] = z


@dataclass
class ParticleBatch:
    """Initial conditions for a set of particles."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    release_step: np.ndarray
    diffusion: np.ndarray
    decay: np.ndarray
    species_id: np.ndarray
    source: np.ndarray  # emission-event index, for tagging

    @property
    def size(self) -> int:
        return int(self.x.shape[0])

    @classmethod
    def concat(cls, batches: Sequence["ParticleBatch"]) -> "ParticleBatch":
        if not batches:
            return cls.empty()
        return cls(*(np.concatenate([getattr(b, f) for b in batches]) for f in cls.__dataclass_fields__))

    @classmethod
    def empty(cls) -> "ParticleBatch":
        z = np.zeros(0)
        zi = np.zeros(0, dtype=np.int64)
        return cls(z, z.copy(), z.copy(), zi, z.copy(), z.copy(), zi.copy(), zi.copy())


@dataclass
class ParticleEvents:
    """Per-particle outcome of an engine run."""

    fate: np.ndarray  # int8 codes: 0 alive, 1 absorbed, 2 leaked, 3 degraded, 4 exited
    time_s: np.ndarray  # event time, -1 while alive
    receiver: np.ndarray  # receiver index for absorbed particles, else -1
    species_id: np.ndarray
    source: np.ndarray
    final_position: np.ndarray = field(repr=False)
    n_receivers: int = 1

    @property
    def emitted(self) -> int:
        return int(self.fate.shape[0])

    def absorption_times(self, receiver: int | None = None) -> np.ndarray:
        mask = self.fate == ABSORBED
        if receiver is not None:
            mask &= self.receiver == receiver
        return self.time_s[mask]


def emission_point(scenario: SimulationScenario, tx: TxPosition | None = None) -> tuple[float, float, float]:
    """Spawn point: on the wall at ``tx``, moved inward by a small offset."""
    tx = tx or scenario.tx_position
    r = scenario.geometry.radius_um - EMISSION_OFFSET_UM
    return (tx.axial_um, r * math.cos(tx.angle_rad), r * math.sin(tx.angle_rad))


def make_batch(
    scenario: SimulationScenario,
    count: int,
    *,
    species_id: int | None = None,
    release_time_s: float = 0.0,
    tx: TxPosition | None = None,
    point: tuple[float, float, float] | None = None,
    source: int = 0,
) -> ParticleBatch:
    sp = scenario.species[0] if species_id is None else scenario.species_by_id(species_id)
    p = point if point is not None else emission_point(scenario, tx)
    n = int(count)
    step = int(round(release_time_s / scenario.time_step_s))
    return ParticleBatch(
        x=np.full(n, p[0], dtype=np.float64),
        y=np.full(n, p[1], dtype=np.float64),
        z=np.full(n, p[2], dtype=np.float64),
        release_step=np.full(n, step, dtype=np.int64),
        diffusion=np.full(n, sp.diffusion_um2_s, dtype=np.float64),
        decay=np.full(n, sp.degradation_rate_per_s, dtype=np.float64),
        species_id=np.full(n, sp.species_id, dtype=np.int64),
        source=np.full(n, source, dtype=np.int64),
    )


def n_steps_for(end_time_s: float, dt: float) -> int:
    return int(math.floor(end_time_s / dt + 1e-9))


def _partition(n: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, min(int(workers), max(n, 1)))
    edges = np.linspace(0, n, workers + 1).round().astype(np.int64)
    return [(int(edges[j]), int(edges[j + 1])) for j in range(workers)]


def run_batch(
    batch: ParticleBatch,
    *,
    seed: int,
    dt: float,
    end_time_s: float,
    scenario: SimulationScenario | None = None,
    free_space_receivers: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray] | None = None,
    free_space_velocity: float = 0.0,
    workers: int = 1,
    id_offset: int = 0,
    chemistry: bool = True,
) -> ParticleEvents:
    """Integrate ``batch`` either inside ``scenario``'s duct or in free space.

    ``chemistry=False`` skips the degradation step entirely.
    """
    n = batch.size
    x, y, z = batch.x.copy(), batch.y.copy(), batch.z.copy()
    fate = np.zeros(n, dtype=np.int8)
    t_event = np.full(n, -1.0)
    receiver = np.full(n, -1, dtype=np.int64)
    n_steps = n_steps_for(end_time_s, dt)

    if scenario is not None:
        g = scenario.geometry
        rcx, rcy, rcz, ra = receiver_arrays(scenario.receivers, g.radius_um)
        vx, vp, vo, vph = valve_arrays(scenario.valves)
        leak_p = scenario.wall.leak_probability if scenario.wall.kind is WallKind.PERMEABLE else 0.0
        params = dict(
            confined=True,
            radius=g.radius_um,
            length=g.length_um,
            cap_policy=END_CAP_CODES[g.end_cap_policy],
            flow_code=FLOW_CODES[scenario.flow.kind],
            mean_velocity=scenario.flow.mean_velocity_um_s,
            leak_p=leak_p,
            downstream_cutoff=math.inf,
        )
    else:
        rcx, rcy, rcz, ra = free_space_receivers
        vx = vp = vo = vph = np.zeros(0)
        cutoff = math.inf
        if free_space_velocity > 0:
            reach = float(np.max(rcx + ra)) if ra.size else float(np.max(x, initial=0.0))
            cutoff = reach + _DRIFT_CUTOFF_LENGTHS * float(np.max(batch.diffusion, initial=0.0)) / free_space_velocity
        params = dict(
            confined=False,
            radius=1.0,
            length=0.0,
            cap_policy=0,
            flow_code=1 if free_space_velocity > 0 else 0,
            mean_velocity=float(free_space_velocity),
            leak_p=0.0,
            downstream_cutoff=cutoff,
        )
    n_receivers = int(ra.shape[0])

    def run(span: tuple[int, int]) -> None:
        lo, hi = span
        _kernel(
            lo, hi, np.uint64(int(seed) & ((1 << 64) - 1)), np.uint64(id_offset),
            x, y, z, batch.release_step, batch.diffusion, batch.decay,
            n_steps, dt, params["confined"], params["radius"], params["length"],
            params["cap_policy"], params["flow_code"], params["mean_velocity"], params["leak_p"],
            vx, vp, vo, vph, rcx, rcy, rcz, ra, params["downstream_cutoff"], bool(chemistry),
            fate, t_event, receiver,
        )  # fmt: skip

    spans = _partition(n, workers)
    if len(spans) == 1:
        run(spans[0])
    else:
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            list(pool.map(run, spans))
    return ParticleEvents(
        fate=fate,
        time_s=t_event,
        receiver=receiver,
        species_id=batch.species_id,
        source=batch.source,
        final_position=np.stack([x, y, z], axis=1),
        n_receivers=n_receivers,
    )


def simulate_events(
    scenario: SimulationScenario,
    *,
    workers: int = 1,
    species_id: int | None = None,
    tx: TxPosition | None = None,
    count: int | None = None,
    chemistry: bool = True,
) -> ParticleEvents:
    """Release one impulse of molecules at t=0 and run them to their fates."""
    validate_scenario(scenario)
    n = scenario.molecules_per_emission if count is None else count
    batch = make_batch(scenario, n, species_id=species_id, tx=tx)
    return run_batch(batch, seed=scenario.seed, dt=scenario.time_step_s, end_time_s=scenario.end_time_s,
                     scenario=scenario, workers=workers, chemistry=chemistry)  # fmt: skip
