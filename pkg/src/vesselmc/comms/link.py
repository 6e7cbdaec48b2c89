"""End-to-end bit pipeline: code, modulate, propagate, detect, decode."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .coding import decode_constrained, encode_constrained, evaluate_ber
from .detection import DetectionConfig, detect
from .modulation import ModulationScheme, as_bits, modulate
from .reception import ReceivedFrame, ReceptionMode, synthesize_received


class LineCoding(str, enum.Enum):
    NONE = "none"
    CONSTRAINED = "constrained"


@dataclass
class LinkResult:
    sent: np.ndarray
    received: np.ndarray
    channel_bits: int
    molecules: int
    frame: ReceivedFrame

    @property
    def ber(self) -> float:
        return evaluate_ber(self.sent, self.received)


def transmit(
    bits,
    scheme: ModulationScheme,
    channel,
    detection: DetectionConfig,
    *,
    rng=None,
    mode: ReceptionMode | str = ReceptionMode.SEMI_ANALYTIC,
    coding: LineCoding | str = LineCoding.NONE,
    cir_estimate=None,
    window_start_s: float = 0.0,
    workers: int = 1,
) -> LinkResult:
    """Send ``bits`` over ``channel`` and return what the detector recovered.

    ``cir_estimate`` defaults to ``channel`` when that is already a CIR.
    """
    sent = as_bits(bits)
    coding = LineCoding(coding)
    tx_bits = encode_constrained(sent) if coding is LineCoding.CONSTRAINED else sent
    schedule = modulate(tx_bits, scheme).shifted(window_start_s)
    frame = synthesize_received(schedule, channel, mode=mode, rng=rng, window_start_s=window_start_s, workers=workers)
    estimate = cir_estimate if cir_estimate is not None else channel
    rx_bits = detect(frame, detection, scheme, estimate)[: tx_bits.size]
    if coding is LineCoding.CONSTRAINED:
        rx_bits = decode_constrained(rx_bits, strict=False)
    return LinkResult(sent, rx_bits[: sent.size], int(tx_bits.size), schedule.total_molecules, frame)
