"""Link layer: modulation, reception, detection and coding."""

from .coding import (
    CONSTRAINED_TABLE,
    InvalidCodeword,
    LengthMismatch,
    UnsupportedCharacter,
    bits_to_codes,
    codes_to_bits,
    decode_constrained,
    encode_constrained,
    evaluate_ber,
    ita2_decode,
    ita2_encode,
    ita2_table,
)
from .detection import DetectionConfig, DetectorKind, default_threshold, detect, detect_adaptive, detect_fixed, isi_threshold
from .link import LineCoding, LinkResult, transmit
from .modulation import (
    BadSchemeArity,
    EmissionEvent,
    ModulationKind,
    ModulationScheme,
    TxSchedule,
    bits_to_symbols,
    modulate,
    symbols_to_bits,
)
from .reception import (
    MimoLink,
    MissingCrossCir,
    ReceivedFrame,
    ReceptionMode,
    default_mimo_positions,
    simulate_mimo,
    synthesize_received,
)
from .synthetic import high_isi_cir, synthetic_channel, zero_isi_cir

__all__ = [
    "BadSchemeArity",
    "CONSTRAINED_TABLE",
    "DetectionConfig",
    "DetectorKind",
    "EmissionEvent",
    "InvalidCodeword",
    "LengthMismatch",
    "LineCoding",
    "LinkResult",
    "MimoLink",
    "MissingCrossCir",
    "ModulationKind",
    "ModulationScheme",
    "ReceivedFrame",
    "ReceptionMode",
    "TxSchedule",
    "UnsupportedCharacter",
    "bits_to_codes",
    "bits_to_symbols",
    "codes_to_bits",
    "decode_constrained",
    "default_mimo_positions",
    "default_threshold",
    "detect",
    "detect_adaptive",
    "detect_fixed",
    "encode_constrained",
    "evaluate_ber",
    "high_isi_cir",
    "isi_threshold",
    "ita2_decode",
    "ita2_encode",
    "ita2_table",
    "modulate",
    "simulate_mimo",
    "symbols_to_bits",
    "synthetic_channel",
    "synthesize_received",
    "transmit",
    "zero_isi_cir",
]
