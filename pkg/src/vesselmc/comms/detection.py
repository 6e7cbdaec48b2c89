"""Threshold and ISI-aware detectors.

The adaptive detector subtracts the expected carry-over of earlier
decisions: for symbol ``i`` the threshold is
``base + sum_{j=1..M} n_hat[i-j] * h[j]`` with ``h[j]`` the per-slot capture
fraction at lag ``j``.  With two links the co-channel's expected
interference (lags ``0..M``) is added too; its lag-0 term uses a tentative
decision on the co-channel made without that term.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..channel import ChannelImpulseResponse
from .modulation import ModulationKind, ModulationScheme, symbols_to_bits
from .reception import MimoLink, MissingCrossCir, ReceivedFrame


class DetectorKind(str, enum.Enum):
    FIXED = "Fixed"
    ADAPTIVE = "Adaptive"


@dataclass(frozen=True)
class DetectionConfig:
    kind: DetectorKind = DetectorKind.FIXED
    threshold: float | tuple[float, ...] | None = None
    isi_memory: int = 0
    ili_enabled: bool = False

    @classmethod
    def fixed(cls, threshold=None) -> "DetectionConfig":
        return cls(DetectorKind.FIXED, _thr(threshold))

    @classmethod
    def adaptive(cls, base_threshold=None, isi_memory: int = 1, ili_enabled: bool = False) -> "DetectionConfig":
        if isi_memory < 0:
            raise ValueError("isi_memory must be >= 0")
        return cls(DetectorKind.ADAPTIVE, _thr(base_threshold), int(isi_memory), bool(ili_enabled))


def _thr(t):
    if t is None or np.isscalar(t):
        return t
    return tuple(float(x) for x in t)


def _thresholds(threshold, scheme: ModulationScheme) -> np.ndarray:
    """Ascending decision boundaries between the CSK levels."""
    m = scheme.n_symbols_alphabet
    if threshold is None:
        levels = np.asarray(scheme.molecules_per_level, dtype=float)
        raise ValueError(f"CSK detection needs {m - 1} threshold(s); levels are {levels.tolist()}")
    t = np.atleast_1d(np.asarray(threshold, dtype=float))
    if t.size != m - 1:
        raise ValueError(f"{m}-level CSK needs {m - 1} thresholds, got {t.size}")
    if np.any(np.diff(t) < 0):
        raise ValueError("thresholds must be non-decreasing")
    return t


def _csk_decide(count: float, bounds: np.ndarray) -> int:
    # symbol k when count reaches bound k-1; count >= threshold means "1" in binary CSK
    return int(np.searchsorted(bounds, count, side="right"))


def detect_fixed(frame: ReceivedFrame, threshold, scheme: ModulationScheme, *, receiver: int = 0) -> np.ndarray:
    """Memoryless detection.

    CSK compares the symbol's count against fixed threshold(s); PPM picks the
    busiest slot and MoSK the busiest species, ties going to the lowest index.
    """
    n_sym = frame.n_symbols
    if scheme.kind is ModulationKind.CSK:
        bounds = _thresholds(threshold, scheme)
        y = frame.channel(receiver, scheme.species_ids[0])
        symbols = np.searchsorted(bounds, y[:n_sym], side="right")
    elif scheme.kind is ModulationKind.PPM:
        y = frame.channel(receiver, scheme.species_ids[0]).reshape(n_sym, scheme.slots_per_symbol)
        symbols = np.argmax(y, axis=1)
    else:
        y = np.stack([frame.channel(receiver, s) for s in scheme.species_ids], axis=1)
        symbols = np.argmax(y[:n_sym], axis=1)
    return symbols_to_bits(symbols, scheme.bits_per_symbol)


def _lag_response(cir: ChannelImpulseResponse, slot_s: float, n_lags: int) -> np.ndarray:
    h = cir.per_slot(slot_s)
    out = np.zeros(n_lags)
    out[: min(n_lags, h.size)] = h[:n_lags]
    return out


def _own_cir(cir_estimate, species: int, receiver: int) -> ChannelImpulseResponse:
    if isinstance(cir_estimate, MimoLink):
        return cir_estimate.h(receiver, receiver)
    if isinstance(cir_estimate, Mapping):
        return cir_estimate[species]
    if cir_estimate.n_receivers > 1:
        return cir_estimate.row(receiver)
    return cir_estimate


def detect_adaptive(
    frame: ReceivedFrame,
    cir_estimate,
    config: DetectionConfig,
    scheme: ModulationScheme,
    *,
    receiver: int = 0,
) -> np.ndarray:
    """ISI-aware detection; with a :class:`MimoLink` and ``ili_enabled``
    the links are detected jointly and a ``(n_links, n_bits)`` array is returned.
    """
    if config.ili_enabled:
        if not isinstance(cir_estimate, MimoLink):
            raise MissingCrossCir("ILI cancellation needs the cross-link CIRs (pass a MimoLink)")
        return _detect_mimo(frame, cir_estimate, config, scheme)
    if scheme.kind is ModulationKind.CSK:
        return _adaptive_csk(frame, cir_estimate, config, scheme, receiver)
    if scheme.kind is ModulationKind.PPM:
        return _adaptive_ppm(frame, cir_estimate, config, scheme, receiver)
    return _adaptive_mosk(frame, cir_estimate, config, scheme, receiver)


def isi_threshold(base, prior_emissions: Sequence[float], h, memory: int):
    """``base + sum_{j=1..memory} prior[-j] * h[j]``; ``prior`` ends with the previous symbol."""
    isi = 0.0
    for j in range(1, min(memory, len(prior_emissions)) + 1):
        isi += prior_emissions[-j] * h[j]
    return np.asarray(base, dtype=float) + isi


def _adaptive_csk(frame, cir_estimate, config, scheme, receiver) -> np.ndarray:
    bounds = _thresholds(config.threshold, scheme)
    M = config.isi_memory
    h = _lag_response(_own_cir(cir_estimate, scheme.species_ids[0], receiver), frame.slot_duration_s, M + 1)
    levels = np.asarray(scheme.molecules_per_level, dtype=float)
    y = frame.channel(receiver, scheme.species_ids[0])
    n = frame.n_symbols
    emitted = np.zeros(n)
    symbols = np.zeros(n, dtype=np.int64)
    for i in range(n):
        symbols[i] = _csk_decide(y[i], isi_threshold(bounds, emitted[:i], h, M))
        emitted[i] = levels[symbols[i]]
    return symbols_to_bits(symbols, scheme.bits_per_symbol)


def _adaptive_ppm(frame, cir_estimate, config, scheme, receiver) -> np.ndarray:
    S = scheme.slots_per_symbol
    n_lags = (config.isi_memory + 1) * S
    h = _lag_response(_own_cir(cir_estimate, scheme.species_ids[0], receiver), frame.slot_duration_s, n_lags)
    y = frame.channel(receiver, scheme.species_ids[0]).astype(float)
    n = frame.n_symbols
    expected = np.zeros(n * S + n_lags)
    symbols = np.zeros(n, dtype=np.int64)
    for i in range(n):
        window = y[i * S : (i + 1) * S] - expected[i * S : (i + 1) * S]
        symbols[i] = int(np.argmax(window))
        s = i * S + symbols[i]
        expected[s : s + n_lags] += scheme.molecules * h
    return symbols_to_bits(symbols, scheme.bits_per_symbol)


def _adaptive_mosk(frame, cir_estimate, config, scheme, receiver) -> np.ndarray:
    M = config.isi_memory
    species = scheme.species_ids
    hs = [_lag_response(_own_cir(cir_estimate, s, receiver), frame.slot_duration_s, M + 1) for s in species]
    y = np.stack([frame.channel(receiver, s).astype(float) for s in species])
    n = frame.n_symbols
    expected = np.zeros((len(species), n + M + 1))
    symbols = np.zeros(n, dtype=np.int64)
    for i in range(n):
        symbols[i] = int(np.argmax(y[:, i] - expected[:, i]))
        k = symbols[i]
        # the emission at lag 0 is the one being decided; only later symbols inherit it
        expected[k, i + 1 : i + M + 1] += scheme.molecules * hs[k][1:]
    return symbols_to_bits(symbols, scheme.bits_per_symbol)


def _detect_mimo(frame: ReceivedFrame, link: MimoLink, config: DetectionConfig, scheme: ModulationScheme) -> np.ndarray:
    if scheme.kind is not ModulationKind.CSK:
        raise ValueError("joint ILI detection is implemented for CSK")
    n_links = min(link.n_tx, link.n_rx, frame.n_receivers)
    bounds = _thresholds(config.threshold, scheme)
    M = config.isi_memory
    slot = frame.slot_duration_s
    h = np.array([[_lag_response(link.h(tx, rx), slot, M + 1) for rx in range(n_links)] for tx in range(n_links)])
    levels = np.asarray(scheme.molecules_per_level, dtype=float)
    y = np.stack([frame.channel(r, scheme.species_ids[0]) for r in range(n_links)]).astype(float)
    n = frame.n_symbols
    emitted = np.zeros((n_links, n))
    symbols = np.zeros((n_links, n), dtype=np.int64)
    for i in range(n):
        base = np.zeros(n_links)
        for l in range(n_links):
            for tx in range(n_links):
                for j in range(1, min(M, i) + 1):
                    base[l] += emitted[tx, i - j] * h[tx, l, j]
        tentative = [levels[_csk_decide(y[l, i], bounds + base[l])] for l in range(n_links)]
        for l in range(n_links):
            lag0 = sum(tentative[m] * h[m, l, 0] for m in range(n_links) if m != l)
            symbols[l, i] = _csk_decide(y[l, i], bounds + base[l] + lag0)
            emitted[l, i] = levels[symbols[l, i]]
    return np.stack([symbols_to_bits(symbols[l], scheme.bits_per_symbol) for l in range(n_links)])


def default_threshold(cir: ChannelImpulseResponse, scheme: ModulationScheme, receiver: int = 0) -> tuple[float, ...]:
    """Midpoints between the expected lag-0 counts of adjacent CSK levels."""
    h0 = float(cir.per_slot(scheme.slot_duration_s, receiver)[0])
    levels = np.asarray(scheme.molecules_per_level, dtype=float) * h0
    return tuple(float(x) for x in (levels[:-1] + levels[1:]) / 2.0)


def detect(frame: ReceivedFrame, config: DetectionConfig, scheme: ModulationScheme, cir_estimate=None, *,
           receiver: int = 0) -> np.ndarray:  # fmt: skip
    if config.kind is DetectorKind.FIXED:
        return detect_fixed(frame, config.threshold, scheme, receiver=receiver)
    if cir_estimate is None:
        raise ValueError("adaptive detection needs a CIR estimate")
    return detect_adaptive(frame, cir_estimate, config, scheme, receiver=receiver)
