"""Decode-and-forward relay chains along a duct."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelImpulseResponse, simulate_cir
from .comms import DetectionConfig, ModulationScheme, ReceptionMode, default_threshold, evaluate_ber, transmit
from .comms.modulation import as_bits
from .core import ReceiverSpec, SimulationScenario, TxPosition, VesselGeometry
from .rng import RngStream


class TooManyHops(ValueError):
    pass


@dataclass(frozen=True)
class RelayHop:
    channel: SimulationScenario | ChannelImpulseResponse
    detection: DetectionConfig


@dataclass
class RelayChain:
    hops: list[RelayHop]
    scheme: ModulationScheme
    processing_delay_s: float = 0.0
    boundaries_um: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.hops:
            raise ValueError("a relay chain needs at least one hop")
        if self.processing_delay_s < 0:
            raise ValueError("processing delay must be >= 0")
        self.hops = [h if isinstance(h, RelayHop) else RelayHop(*h) for h in self.hops]


@dataclass
class RelayReport:
    per_hop_ber: list[float]
    end_to_end_ber: float
    molecules_per_hop: list[int]
    hop_start_s: list[float] = field(default_factory=list)

    @property
    def total_molecules(self) -> int:
        return sum(self.molecules_per_hop)

    def to_dict(self) -> dict:
        return {
            "per_hop_ber": self.per_hop_ber,
            "end_to_end_ber": self.end_to_end_ber,
            "molecules_per_hop": self.molecules_per_hop,
            "total_molecules": self.total_molecules,
            "hop_start_s": self.hop_start_s,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _hop_rng(rng, hop: int) -> RngStream:
    if isinstance(rng, RngStream):
        return rng.child(hop)
    return RngStream(0 if rng is None else int(rng), hop)


def simulate_relay_chain(
    chain: RelayChain,
    bits,
    rng=None,
    *,
    mode: ReceptionMode | str = ReceptionMode.SEMI_ANALYTIC,
    workers: int = 1,
) -> RelayReport:
    """Hop ``i`` re-modulates hop ``i-1``'s decisions with fresh molecules.

    Each hop's frame starts ``processing_delay_s`` after the previous frame
    ends; the receive window moves with it, so decisions do not depend on
    the delay.
    """
    source = as_bits(bits)
    if source.size == 0:
        raise ValueError("bits must be non-empty")
    mode = ReceptionMode(mode)
    current = source
    per_hop, budgets, starts = [], [], []
    start = 0.0
    for h, hop in enumerate(chain.hops):
        channel = hop.channel
        estimate = channel
        if isinstance(channel, SimulationScenario):
            estimate = simulate_cir(channel, workers=workers)[0]
            if mode is ReceptionMode.SEMI_ANALYTIC:
                channel = estimate
        result = transmit(current, chain.scheme, channel, hop.detection, rng=_hop_rng(rng, h), mode=mode,
                          cir_estimate=estimate, window_start_s=start, workers=workers)  # fmt: skip
        per_hop.append(result.ber)
        budgets.append(result.molecules)
        starts.append(start)
        current = result.received
        n_symbols = result.frame.n_symbols
        start += n_symbols * chain.scheme.symbol_duration_s + chain.processing_delay_s
    return RelayReport(per_hop, evaluate_ber(source, current), budgets, starts)


def _boundary_valves(n_valves: int, hops: int) -> list[int]:
    """Indices of the valves used as hop boundaries, spread evenly over the valve list."""
    return [round((k + 1) * (n_valves + 1) / hops) - 1 for k in range(hops - 1)]


def valve_aligned_placement(
    scenario: SimulationScenario,
    hops: int,
    scheme: ModulationScheme,
    detection: DetectionConfig,
    *,
    processing_delay_s: float = 0.0,
) -> RelayChain:
    """Split the duct at valves into ``hops`` independent segments.

    Each segment is re-based to start at its transmitter; the relay
    receiver sits on the wall just upstream of the boundary valve (sphere
    touching the valve plane) and the next transmitter just downstream of
    it.  Valves that are not hop boundaries stay inside their segment.
    Segment ``k`` runs with seed ``scenario.seed + k``.
    """
    valves = sorted(scenario.valves, key=lambda v: v.axial_um)
    if hops < 1:
        raise ValueError("hops must be >= 1")
    if hops > len(valves) + 1:
        raise TooManyHops(f"{hops} hops need at least {hops - 1} valves, scenario has {len(valves)}")
    if hops == 1:
        return RelayChain([RelayHop(scenario, detection)], scheme, processing_delay_s)

    chosen = _boundary_valves(len(valves), hops)
    boundaries = [valves[i].axial_um for i in chosen]
    rx = scenario.receivers[0]
    starts = [scenario.tx_position.axial_um] + boundaries
    ends = boundaries + [scenario.geometry.length_um]
    segments = []
    for k, (a, b) in enumerate(zip(starts, ends)):
        last = k == hops - 1
        inner = tuple(
            dataclasses.replace(v, axial_um=v.axial_um - a)
            for i, v in enumerate(valves)
            if a < v.axial_um < b and i not in chosen
        )
        rx_axial = rx.center_axial_um - a if last else (b - a) - rx.radius_um
        sc = scenario.replace(
            geometry=VesselGeometry(scenario.geometry.radius_um, float(b - a), scenario.geometry.end_cap_policy),
            tx_position=TxPosition(0.0, scenario.tx_position.angle_rad),
            receivers=(ReceiverSpec(rx_axial, rx.wall_anchor_angle_rad, rx.radius_um),),
            valves=inner,
            seed=scenario.seed + k,
        )
        segments.append(RelayHop(sc, detection))
    return RelayChain(segments, scheme, processing_delay_s, tuple(boundaries))


def _per_hop_detection(cir: ChannelImpulseResponse, scheme: ModulationScheme, isi_memory: int | None) -> DetectionConfig:
    if isi_memory is None:
        isi_memory = max(1, cir.per_slot(scheme.symbol_duration_s).size - 1)
    return DetectionConfig.adaptive(default_threshold(cir, scheme), isi_memory)


def compare_valve_aligned(
    scenario: SimulationScenario,
    hops: int,
    *,
    molecules_per_bit: int,
    symbol_duration_s: float,
    seeds=range(10),
    n_bits: int = 1000,
    isi_memory: int | None = None,
    workers: int = 1,
) -> dict:
    """Valve-aligned relay chain against one end-to-end link at the same molecule budget.

    The single link spends ``molecules_per_bit`` per "1"; each of the ``hops``
    segments spends ``molecules_per_bit // hops``.  Every link uses BCSK with
    an adaptive detector whose threshold comes from its own CIR; by default
    its ISI memory spans the whole CIR.  The
    outcome is returned, not judged.
    """
    direct_scheme = ModulationScheme.bcsk(molecules_per_bit, symbol_duration_s)
    hop_scheme = ModulationScheme.bcsk(max(1, molecules_per_bit // hops), symbol_duration_s)
    direct_cir = simulate_cir(scenario, workers=workers)[0]
    direct = RelayChain([RelayHop(direct_cir, _per_hop_detection(direct_cir, direct_scheme, isi_memory))],
                        direct_scheme)  # fmt: skip
    placed = valve_aligned_placement(scenario, hops, hop_scheme, DetectionConfig.fixed())
    relay_hops = []
    for hop in placed.hops:
        cir = simulate_cir(hop.channel, workers=workers)[0]
        relay_hops.append(RelayHop(cir, _per_hop_detection(cir, hop_scheme, isi_memory)))
    relayed = RelayChain(relay_hops, hop_scheme, boundaries_um=placed.boundaries_um)
    single, chained = [], []
    for seed in seeds:
        bits = np.random.default_rng(seed).integers(0, 2, n_bits)
        single.append(simulate_relay_chain(direct, bits, seed).end_to_end_ber)
        chained.append(simulate_relay_chain(relayed, bits, seed).end_to_end_ber)
    return {
        "hops": hops,
        "boundaries_um": list(placed.boundaries_um),
        "molecules_per_bit": molecules_per_bit,
        "single_link_ber": single,
        "relay_ber": chained,
        "single_link_mean": float(np.mean(single)),
        "relay_mean": float(np.mean(chained)),
        "relay_not_worse": bool(np.mean(chained) <= np.mean(single)),
    }
