"""Hand-built CIRs for detector and relay tests."""

from __future__ import annotations

import numpy as np

from ..channel import ChannelImpulseResponse

# per-slot capture fractions; the tail (lags >= 1) carries 40% of the captured mass
HIGH_ISI_FRACTIONS = (0.15, 0.06, 0.03, 0.01)
_SCALE = 10**6


def zero_isi_cir(slot_duration_s: float = 1.0, capture: float = 1.0, n_slots: int = 4) -> ChannelImpulseResponse:
    """Every captured molecule lands in the emission's own slot."""
    counts = np.zeros(n_slots, dtype=np.int64)
    counts[0] = round(capture * _SCALE)
    return ChannelImpulseResponse(slot_duration_s, counts, _SCALE, "synthetic:zero-isi")


def high_isi_cir(slot_duration_s: float = 1.0, fractions=HIGH_ISI_FRACTIONS) -> ChannelImpulseResponse:
    counts = np.round(np.asarray(fractions, dtype=float) * _SCALE).astype(np.int64)
    return ChannelImpulseResponse(slot_duration_s, counts, _SCALE, "synthetic:high-isi")


def synthetic_channel(name: str, slot_duration_s: float = 1.0) -> ChannelImpulseResponse:
    if name == "zero-isi":
        return zero_isi_cir(slot_duration_s)
    if name == "high-isi":
        return high_isi_cir(slot_duration_s)
    raise ValueError(f"unknown synthetic channel {name!r} (zero-isi, high-isi)")
