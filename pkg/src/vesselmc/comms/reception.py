"""Turning an emission schedule into per-slot receiver counts.

Two paths: ``semi-analytic`` treats each emitted molecule as landing in
(receiver, slot) cell ``c`` with probability read off the CIR, so one
emission is a single multinomial draw; ``full-particle`` releases every
molecule into the duct and bins the absorption times.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..channel import (
    ChannelImpulseResponse,
    MassLedger,
    ParticleBatch,
    default_bin_width,
    make_batch,
    run_batch,
    simulate_cir,
)
from ..channel.cir import BinMismatch, ledger_from_events, n_bins_for
from ..channel.engine import ABSORBED
from ..core import SimulationScenario, TxPosition, validate_scenario
from ..rng import RngStream, draw_u64
from .modulation import TxSchedule


class ReceptionMode(str, enum.Enum):
    SEMI_ANALYTIC = "semi-analytic"
    FULL_PARTICLE = "full-particle"


class MissingCrossCir(KeyError):
    pass


@dataclass
class MimoLink:
    """Channel matrix: ``cirs[(tx, rx)]`` is a single-row CIR (or ``None`` if unknown)."""

    cirs: dict
    n_tx: int
    n_rx: int

    @classmethod
    def from_tx_runs(cls, runs: Sequence[ChannelImpulseResponse]) -> "MimoLink":
        """One multi-receiver CIR per transmitter."""
        n_rx = runs[0].n_receivers
        cirs = {(i, j): c.row(j) for i, c in enumerate(runs) for j in range(n_rx)}
        return cls(cirs, len(runs), n_rx)

    def h(self, tx: int, rx: int) -> ChannelImpulseResponse:
        c = self.cirs.get((tx, rx))
        if c is None:
            raise MissingCrossCir(f"no CIR for transmitter {tx} -> receiver {rx}")
        return c

    @property
    def cir_matrix(self) -> list[list[ChannelImpulseResponse | None]]:
        return [[self.cirs.get((i, j)) for j in range(self.n_rx)] for i in range(self.n_tx)]

    @property
    def bin_width_s(self) -> float:
        return next(c for c in self.cirs.values() if c is not None).bin_width_s


@dataclass
class ReceivedFrame:
    counts: np.ndarray  # (n_receivers, n_species, n_slots)
    slot_duration_s: float
    species_ids: tuple[int, ...]
    slots_per_symbol: int = 1
    ledger: MassLedger | None = field(default=None, repr=False)

    @property
    def n_receivers(self) -> int:
        return self.counts.shape[0]

    @property
    def n_slots(self) -> int:
        return self.counts.shape[2]

    @property
    def n_symbols(self) -> int:
        return self.n_slots // self.slots_per_symbol

    def channel(self, receiver: int = 0, species_id: int | None = None) -> np.ndarray:
        """Slot counts at one receiver; all species summed when ``species_id`` is None."""
        if species_id is None:
            return self.counts[receiver].sum(axis=0)
        return self.counts[receiver, self.species_ids.index(species_id)]


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.numpy_generator()
    return RngStream(0 if rng is None else int(rng), 0).numpy_generator()


def _particle_seed(rng) -> int:
    if isinstance(rng, RngStream):
        s = int(draw_u64(rng.key, np.uint64(rng.counter)))
        rng.counter += 1
        return s
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63))
    return 0 if rng is None else int(rng)


def _lookup(channel, tx: int, species: int) -> ChannelImpulseResponse:
    """Multi-row CIR (rows = receivers) seen from ``tx`` for ``species``."""
    if isinstance(channel, ChannelImpulseResponse):
        return channel
    if isinstance(channel, MimoLink):
        cirs = [channel.h(tx, j) for j in range(channel.n_rx)]
        first = cirs[0]
        if any(c.bin_width_s != first.bin_width_s or c.emitted != first.emitted for c in cirs):
            raise BinMismatch("MIMO CIRs must share bin width and emitted count")
        rows = np.zeros((len(cirs), max(c.n_bins for c in cirs)), dtype=np.int64)
        for j, c in enumerate(cirs):
            rows[j, : c.n_bins] = c.counts[0]
        return ChannelImpulseResponse(first.bin_width_s, rows, first.emitted)
    if isinstance(channel, Mapping):
        if species not in channel:
            raise KeyError(f"no CIR for species {species}")
        return _lookup(channel[species], tx, species)
    raise TypeError(f"unsupported channel type {type(channel).__name__}")


def _bin_offset(time_s: float, bin_width_s: float) -> int:
    ratio = time_s / bin_width_s
    n = int(round(ratio))
    if abs(ratio - n) > 1e-6 * max(1.0, abs(ratio)):
        raise BinMismatch(f"emission at {time_s} s is not on the {bin_width_s} s bin grid")
    return n


def _lag_matrix(cir: ChannelImpulseResponse, k: int, phase: int) -> np.ndarray:
    """Per-molecule probability of landing ``j`` slots after the emission's slot, per receiver."""
    p = cir.counts / cir.emitted if cir.emitted else np.zeros_like(cir.counts, dtype=np.float64)
    idx = (phase + np.arange(cir.n_bins)) // k
    n_lags = int(idx[-1]) + 1 if idx.size else 1
    out = np.zeros((cir.n_receivers, n_lags))
    for r in range(cir.n_receivers):
        out[r] = np.bincount(idx, weights=p[r], minlength=n_lags)
    return out


def _semi_analytic(schedule: TxSchedule, channel, gen, species_ids, window_start_s, n_slots) -> np.ndarray:
    slot = schedule.slot_duration_s
    groups: dict = {}
    cache: dict = {}
    n_rx = None
    for e in schedule.events:
        cir = _lookup(channel, e.transmitter, e.species_id)
        k = cir.bins_per(slot)
        off = _bin_offset(e.time_s - window_start_s, cir.bin_width_s)
        if off < 0:
            raise ValueError("emission before the receive window")
        key = (e.transmitter, e.species_id, off % k)
        if key not in cache:
            cache[key] = _lag_matrix(cir, k, off % k)
        n_rx = cache[key].shape[0] if n_rx is None else n_rx
        groups.setdefault((key, e.count), []).append(off // k)

    counts = np.zeros((n_rx or _n_rx(channel), len(species_ids), n_slots), dtype=np.int64)
    for (key, count), starts in groups.items():
        lags = cache[key]
        n_r, n_lags = lags.shape
        pvals = lags.ravel()
        total = pvals.sum()
        if total > 1.0:
            pvals = pvals / total
        pvals = np.append(pvals, max(0.0, 1.0 - pvals.sum()))
        draws = gen.multinomial(count, pvals, size=len(starts))[:, :-1].reshape(len(starts), n_r, n_lags)
        s_idx = species_ids.index(key[1])
        for s0, d in zip(starts, draws):
            width = min(n_lags, n_slots - s0)
            if width > 0:
                counts[:n_r, s_idx, s0 : s0 + width] += d[:, :width]
    return counts


def _n_rx(channel) -> int:
    if isinstance(channel, ChannelImpulseResponse):
        return channel.n_receivers
    if isinstance(channel, MimoLink):
        return channel.n_rx
    if isinstance(channel, Mapping):
        return _n_rx(next(iter(channel.values())))
    if isinstance(channel, SimulationScenario):
        return len(channel.receivers)
    return 1


def _full_particle(schedule, scenario, tx_positions, seed, species_ids, window_start_s, n_slots, workers):
    validate_scenario(scenario)
    batches = []
    for e in schedule.events:
        tx = tx_positions[e.transmitter] if tx_positions else None
        batches.append(make_batch(scenario, e.count, species_id=e.species_id, release_time_s=e.time_s - window_start_s,
                                  tx=tx, source=e.transmitter))  # fmt: skip
    batch = ParticleBatch.concat(batches) if batches else ParticleBatch.empty()
    slot = schedule.slot_duration_s
    horizon = n_slots * slot
    events = run_batch(batch, seed=seed, dt=scenario.time_step_s, end_time_s=horizon, scenario=scenario,
                       workers=workers)  # fmt: skip
    counts = np.zeros((len(scenario.receivers), len(species_ids), n_slots), dtype=np.int64)
    mask = events.fate == ABSORBED
    if mask.any():
        idx = np.minimum(np.floor(events.time_s[mask] / slot + 1e-9).astype(np.int64), n_slots - 1)
        sp = np.searchsorted(np.asarray(species_ids), events.species_id[mask])
        np.add.at(counts, (events.receiver[mask], sp, idx), 1)
    return counts, ledger_from_events(events)


def synthesize_received(
    schedule: TxSchedule,
    channel,
    *,
    mode: ReceptionMode | str = ReceptionMode.SEMI_ANALYTIC,
    rng=None,
    window_start_s: float = 0.0,
    tx_positions: Sequence[TxPosition] | None = None,
    workers: int = 1,
) -> ReceivedFrame:
    """Receiver counts for ``schedule`` over its frame.

    ``channel`` is a CIR, a ``{species_id: CIR}`` map, a :class:`MimoLink`
    (semi-analytic) or a :class:`SimulationScenario` (full-particle; a
    scenario given in semi-analytic mode is first reduced to its CIR).
    The CIR bin width must divide the slot duration, else ``BinMismatch``.
    """
    mode = ReceptionMode(mode)
    species_ids = tuple(sorted(set(schedule.species_ids) | {e.species_id for e in schedule.events}))
    n_slots = schedule.n_slots
    if mode is ReceptionMode.FULL_PARTICLE:
        if not isinstance(channel, SimulationScenario):
            raise TypeError("full-particle reception needs a SimulationScenario")
        counts, ledger = _full_particle(schedule, channel, tx_positions, _particle_seed(rng), species_ids,
                                        window_start_s, n_slots, workers)  # fmt: skip
        return ReceivedFrame(counts, schedule.slot_duration_s, species_ids, schedule.slots_per_symbol, ledger)
    if isinstance(channel, SimulationScenario):
        channel = {s: simulate_cir(channel, species_id=s, workers=workers)[0] for s in species_ids}
    counts = _semi_analytic(schedule, channel, _as_generator(rng), species_ids, window_start_s, n_slots)
    return ReceivedFrame(counts, schedule.slot_duration_s, species_ids, schedule.slots_per_symbol)


def default_mimo_positions(scenario: SimulationScenario) -> list[TxPosition]:
    """One transmitter per receiver, on the receiver's side of the duct."""
    return [TxPosition(scenario.tx_position.axial_um, rx.wall_anchor_angle_rad) for rx in scenario.receivers]


def simulate_mimo(
    scenario: SimulationScenario,
    tx_positions: Sequence[TxPosition] | None = None,
    *,
    molecules: Sequence[int] | None = None,
    workers: int = 1,
    bin_width_s: float | None = None,
) -> MimoLink:
    """Channel matrix from one impulse run per transmitter with every receiver present.

    Transmitter ``i`` runs with seed ``scenario.seed + i``; a transmitter
    given zero molecules yields all-zero CIRs.
    """
    positions = list(tx_positions) if tx_positions is not None else default_mimo_positions(scenario)
    runs = []
    for i, pos in enumerate(positions):
        n = scenario.molecules_per_emission if molecules is None else int(molecules[i])
        sc = scenario.replace(tx_position=pos, seed=scenario.seed + i, molecules_per_emission=n)
        if n == 0:
            ref = scenario.replace(tx_position=pos)
            bw = bin_width_s or default_bin_width(scenario.time_step_s)
            n_bins = n_bins_for(scenario.end_time_s, bw)
            runs.append(ChannelImpulseResponse(bw, np.zeros((len(scenario.receivers), n_bins)), 0, ref.digest()))
            continue
        runs.append(simulate_cir(sc, workers=workers, bin_width_s=bin_width_s)[0])
    return MimoLink.from_tx_runs(runs)
