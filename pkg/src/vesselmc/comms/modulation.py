"""CSK / PPM / MoSK modulation into emission schedules."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class BadSchemeArity(ValueError):
    pass


class ModulationKind(str, enum.Enum):
    CSK = "CSK"
    PPM = "PPM"
    MOSK = "MoSK"


@dataclass(frozen=True)
class ModulationScheme:
    kind: ModulationKind
    symbol_duration_s: float
    molecules_per_level: tuple[int, ...] = ()
    slots_per_symbol: int = 1
    molecules: int = 0
    species_ids: tuple[int, ...] = (0,)

    def __post_init__(self):
        if self.symbol_duration_s <= 0:
            raise ValueError("symbol duration must be > 0")
        m = self.n_symbols_alphabet
        if m < 2 or m & (m - 1):
            raise BadSchemeArity(f"{self.kind.value} needs a power-of-two alphabet >= 2, got {m}")
        if self.kind is ModulationKind.CSK:
            levels = self.molecules_per_level
            if any(b <= a for a, b in zip(levels, levels[1:])) or min(levels) < 0:
                raise ValueError("CSK molecule counts must be non-negative and strictly increasing")
        elif self.kind is ModulationKind.MOSK:
            if len(set(self.species_ids)) != len(self.species_ids):
                raise ValueError("MoSK species must be distinct")
        if self.kind is not ModulationKind.PPM and self.slots_per_symbol != 1:
            raise ValueError("only PPM divides a symbol into slots")

    @classmethod
    def bcsk(cls, molecules: int, symbol_duration_s: float, species_id: int = 0) -> "ModulationScheme":
        return cls(ModulationKind.CSK, symbol_duration_s, (0, int(molecules)), species_ids=(species_id,))

    @classmethod
    def csk(cls, molecules_per_level: Sequence[int], symbol_duration_s: float, species_id: int = 0) -> "ModulationScheme":
        return cls(ModulationKind.CSK, symbol_duration_s, tuple(int(n) for n in molecules_per_level), species_ids=(species_id,))

    @classmethod
    def ppm(cls, slots: int, molecules: int, symbol_duration_s: float, species_id: int = 0) -> "ModulationScheme":
        if slots < 2:
            raise BadSchemeArity("PPM needs at least two slots")
        return cls(ModulationKind.PPM, symbol_duration_s, slots_per_symbol=int(slots), molecules=int(molecules),
                   species_ids=(species_id,))  # fmt: skip

    @classmethod
    def mosk(cls, species_ids: Sequence[int], molecules: int, symbol_duration_s: float) -> "ModulationScheme":
        return cls(ModulationKind.MOSK, symbol_duration_s, molecules=int(molecules), species_ids=tuple(species_ids))

    @property
    def n_symbols_alphabet(self) -> int:
        if self.kind is ModulationKind.CSK:
            return len(self.molecules_per_level)
        if self.kind is ModulationKind.PPM:
            return self.slots_per_symbol
        return len(self.species_ids)

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.n_symbols_alphabet))

    @property
    def slot_duration_s(self) -> float:
        return self.symbol_duration_s / self.slots_per_symbol

    def emission_for(self, symbol: int) -> tuple[int, int, int]:
        """``(slot offset, molecule count, species)`` emitted for ``symbol``."""
        if self.kind is ModulationKind.CSK:
            return 0, self.molecules_per_level[symbol], self.species_ids[0]
        if self.kind is ModulationKind.PPM:
            return symbol, self.molecules, self.species_ids[0]
        return 0, self.molecules, self.species_ids[symbol]

    @property
    def molecules_per_symbol_max(self) -> int:
        if self.kind is ModulationKind.CSK:
            return max(self.molecules_per_level)
        return self.molecules


@dataclass(frozen=True)
class EmissionEvent:
    time_s: float
    count: int
    species_id: int = 0
    transmitter: int = 0


@dataclass(frozen=True)
class TxSchedule:
    events: tuple[EmissionEvent, ...]
    n_symbols: int
    symbol_duration_s: float
    slots_per_symbol: int = 1
    species_ids: tuple[int, ...] = (0,)
    padding_bits: int = 0

    @property
    def slot_duration_s(self) -> float:
        return self.symbol_duration_s / self.slots_per_symbol

    @property
    def n_slots(self) -> int:
        return self.n_symbols * self.slots_per_symbol

    @property
    def duration_s(self) -> float:
        return self.n_symbols * self.symbol_duration_s

    @property
    def total_molecules(self) -> int:
        return sum(e.count for e in self.events)

    def shifted(self, offset_s: float) -> "TxSchedule":
        events = tuple(EmissionEvent(e.time_s + offset_s, e.count, e.species_id, e.transmitter) for e in self.events)
        return TxSchedule(events, self.n_symbols, self.symbol_duration_s, self.slots_per_symbol, self.species_ids,
                          self.padding_bits)  # fmt: skip

    def on_transmitter(self, transmitter: int) -> "TxSchedule":
        events = tuple(EmissionEvent(e.time_s, e.count, e.species_id, transmitter) for e in self.events)
        return TxSchedule(events, self.n_symbols, self.symbol_duration_s, self.slots_per_symbol, self.species_ids,
                          self.padding_bits)  # fmt: skip

    def merged(self, other: "TxSchedule") -> "TxSchedule":
        events = tuple(sorted(self.events + other.events, key=lambda e: (e.time_s, e.transmitter)))
        species = tuple(sorted(set(self.species_ids) | set(other.species_ids)))
        return TxSchedule(events, max(self.n_symbols, other.n_symbols), self.symbol_duration_s,
                          self.slots_per_symbol, species, max(self.padding_bits, other.padding_bits))  # fmt: skip


def as_bits(bits) -> np.ndarray:
    if isinstance(bits, str):
        bits = [int(c) for c in bits if c in "01"]
    arr = np.asarray(bits, dtype=np.int8).ravel()
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("bits must be 0/1")
    return arr


def bits_to_symbols(bits, bits_per_symbol: int) -> tuple[np.ndarray, int]:
    """MSB-first grouping with zero padding; returns ``(symbols, n_pad)``."""
    b = as_bits(bits)
    pad = (-b.size) % bits_per_symbol
    if pad:
        b = np.concatenate([b, np.zeros(pad, dtype=np.int8)])
    groups = b.reshape(-1, bits_per_symbol).astype(np.int64)
    weights = 1 << np.arange(bits_per_symbol - 1, -1, -1)
    return groups @ weights, pad


def symbols_to_bits(symbols, bits_per_symbol: int) -> np.ndarray:
    s = np.asarray(symbols, dtype=np.int64).reshape(-1, 1)
    shifts = np.arange(bits_per_symbol - 1, -1, -1)
    return ((s >> shifts) & 1).astype(np.int8).ravel()


def modulate(bits, scheme: ModulationScheme) -> TxSchedule:
    """Map bits to emission events; zero-count emissions are omitted."""
    symbols, pad = bits_to_symbols(bits, scheme.bits_per_symbol)
    events = []
    for i, sym in enumerate(symbols):
        slot, count, species = scheme.emission_for(int(sym))
        if count > 0:
            t = i * scheme.symbol_duration_s + slot * scheme.slot_duration_s
            events.append(EmissionEvent(t, count, species))
    return TxSchedule(tuple(events), len(symbols), scheme.symbol_duration_s, scheme.slots_per_symbol,
                      tuple(scheme.species_ids), pad)  # fmt: skip
