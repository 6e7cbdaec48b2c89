"""ISI-mitigating block code, ITA2 text coding and bit error rate."""

from __future__ import annotations

import math

import numpy as np

from .modulation import as_bits


class InvalidCodeword(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class UnsupportedCharacter(ValueError):
    pass


# 2 data bits -> 4 channel bits, at most one "1" per codeword so the
# channel never sees back-to-back releases inside a block
CONSTRAINED_TABLE = {
    (0, 0): (0, 0, 0, 0),
    (0, 1): (0, 0, 0, 1),
    (1, 0): (0, 0, 1, 0),
    (1, 1): (0, 1, 0, 0),
}
_CONSTRAINED_INVERSE = {v: k for k, v in CONSTRAINED_TABLE.items()}
_CODEWORDS = np.array(list(CONSTRAINED_TABLE.values()), dtype=np.int8)
_DATAWORDS = np.array(list(CONSTRAINED_TABLE.keys()), dtype=np.int8)


def encode_constrained(bits) -> np.ndarray:
    """Rate-1/2 constrained code; odd-length input is zero padded."""
    b = as_bits(bits)
    if b.size % 2:
        b = np.append(b, np.int8(0))
    pairs = b.reshape(-1, 2)
    return _CODEWORDS[pairs[:, 0] * 2 + pairs[:, 1]].ravel()


def decode_constrained(bits, *, strict: bool = True) -> np.ndarray:
    """Inverse of :func:`encode_constrained`.

    Strict decoding raises :class:`InvalidCodeword` on a word outside the
    table; otherwise the nearest codeword (Hamming, lowest index on ties)
    is used, which is what a receiver does with noisy decisions.
    """
    b = as_bits(bits)
    if b.size % 4:
        raise InvalidCodeword(f"length {b.size} is not a multiple of 4")
    words = b.reshape(-1, 4)
    out = np.empty((words.shape[0], 2), dtype=np.int8)
    for i, w in enumerate(words):
        key = tuple(int(x) for x in w)
        if key in _CONSTRAINED_INVERSE:
            out[i] = _CONSTRAINED_INVERSE[key]
        elif strict:
            raise InvalidCodeword(f"{''.join(map(str, key))} is not a codeword")
        else:
            out[i] = _DATAWORDS[int(np.argmin(np.abs(_CODEWORDS - w).sum(axis=1)))]
    return out.ravel()


def evaluate_ber(sent, received) -> float:
    """Fraction of differing bits; NaN for empty input."""
    a, b = as_bits(sent), as_bits(received)
    if a.size != b.size:
        raise LengthMismatch(f"{a.size} sent vs {b.size} received bits")
    if a.size == 0:
        return math.nan
    return float(np.count_nonzero(a != b) / a.size)


# ITA2 (ITU-T S.1) code points, value -> (letters, figures); None where the
# international table leaves the position national or unassigned
ITA2_LTRS = 0b11111
ITA2_FIGS = 0b11011
_ITA2 = {
    0b00000: (None, None),
    0b00001: ("E", "3"),
    0b00010: ("\n", "\n"),
    0b00011: ("A", "-"),
    0b00100: (" ", " "),
    0b00101: ("S", "'"),
    0b00110: ("I", "8"),
    0b00111: ("U", "7"),
    0b01000: ("\r", "\r"),
    0b01001: ("D", None),
    0b01010: ("R", "4"),
    0b01011: ("J", None),
    0b01100: ("N", ","),
    0b01101: ("F", None),
    0b01110: ("C", ":"),
    0b01111: ("K", "("),
    0b10000: ("T", "5"),
    0b10001: ("Z", "+"),
    0b10010: ("L", ")"),
    0b10011: ("W", "2"),
    0b10100: ("H", None),
    0b10101: ("Y", "6"),
    0b10110: ("P", "0"),
    0b10111: ("Q", "1"),
    0b11000: ("O", "9"),
    0b11001: ("B", "?"),
    0b11010: ("G", None),
    0b11100: ("M", "."),
    0b11101: ("X", "/"),
    0b11110: ("V", "="),
}
_LETTERS = {ch: code for code, (ch, _) in _ITA2.items() if ch is not None}
_FIGURES = {ch: code for code, (_, ch) in _ITA2.items() if ch is not None}
_SHIFT_FREE = {" ", "\r", "\n"}


def ita2_table() -> list[tuple[int, str | None, str | None]]:
    """``(code, letter, figure)`` rows for every non-shift code point."""
    return [(code, lt, fg) for code, (lt, fg) in sorted(_ITA2.items())]


def ita2_encode(text: str) -> list[int]:
    """Five-bit ITA2 codes, starting in letters mode.

    Lower case is folded to upper case; a shift code is emitted only when
    the next character needs the other mode.
    """
    codes: list[int] = []
    figures = False
    for ch in text.upper():
        if ch in _SHIFT_FREE:
            codes.append(_LETTERS[ch])
        elif ch in _LETTERS:
            if figures:
                codes.append(ITA2_LTRS)
                figures = False
            codes.append(_LETTERS[ch])
        elif ch in _FIGURES:
            if not figures:
                codes.append(ITA2_FIGS)
                figures = True
            codes.append(_FIGURES[ch])
        else:
            raise UnsupportedCharacter(f"{ch!r} has no ITA2 code")
    return codes


def ita2_decode(codes) -> str:
    out = []
    figures = False
    for code in codes:
        code = int(code)
        if not 0 <= code < 32:
            raise ValueError(f"{code} is not a 5-bit code")
        if code == ITA2_LTRS:
            figures = False
        elif code == ITA2_FIGS:
            figures = True
        else:
            ch = _ITA2[code][1 if figures else 0]
            if ch is not None:
                out.append(ch)
    return "".join(out)


def codes_to_bits(codes, width: int = 5) -> np.ndarray:
    c = np.asarray(list(codes), dtype=np.int64).reshape(-1, 1)
    return ((c >> np.arange(width - 1, -1, -1)) & 1).astype(np.int8).ravel()


def bits_to_codes(bits, width: int = 5) -> list[int]:
    b = as_bits(bits)
    usable = b.size - b.size % width
    groups = b[:usable].reshape(-1, width).astype(np.int64)
    return (groups @ (1 << np.arange(width - 1, -1, -1))).tolist()
