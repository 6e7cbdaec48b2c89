"""Channel impulse responses, the mass ledger and CIR summary statistics."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .engine import ABSORBED, ALIVE, DEGRADED, EXITED_CODE, LEAKED_CODE, ParticleEvents


class EmptyCir(ValueError):
    pass


@dataclass
class ChannelImpulseResponse:
    """Absorption counts per time bin, one row per receiver."""

    bin_width_s: float
    counts: np.ndarray  # shape (n_receivers, n_bins), int64
    emitted: int
    scenario_hash: str = ""

    def __post_init__(self):
        self.counts = np.atleast_2d(np.asarray(self.counts, dtype=np.int64))
        if self.bin_width_s <= 0:
            raise ValueError("bin width must be > 0")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")

    @property
    def n_receivers(self) -> int:
        return self.counts.shape[0]

    @property
    def n_bins(self) -> int:
        return self.counts.shape[1]

    def bin_starts(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.bin_width_s

    def total(self, receiver: int = 0) -> int:
        return int(self.counts[receiver].sum())

    def row(self, receiver: int) -> "ChannelImpulseResponse":
        return ChannelImpulseResponse(self.bin_width_s, self.counts[receiver : receiver + 1], self.emitted, self.scenario_hash)

    def probabilities(self, receiver: int = 0) -> np.ndarray:
        """Per-bin capture probability of one emitted molecule."""
        if self.emitted == 0:
            return np.zeros(self.n_bins)
        return self.counts[receiver] / self.emitted

    def bins_per(self, duration_s: float) -> int:
        ratio = duration_s / self.bin_width_s
        n = int(round(ratio))
        if n < 1 or abs(ratio - n) > 1e-6 * max(1.0, ratio):
            raise BinMismatch(f"bin width {self.bin_width_s} s does not divide {duration_s} s")
        return n

    def per_slot(self, slot_duration_s: float, receiver: int = 0) -> np.ndarray:
        """Capture probability per slot of ``slot_duration_s`` (the slot-lag response)."""
        k = self.bins_per(slot_duration_s)
        p = self.probabilities(receiver)
        n_slots = -(-p.size // k)
        padded = np.zeros(n_slots * k)
        padded[: p.size] = p
        return padded.reshape(n_slots, k).sum(axis=1)

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write("# vesselmc channel impulse response\n")
        buf.write(f"# scenario_digest: {self.scenario_hash}\n")
        buf.write(f"# emitted: {self.emitted}\n")
        buf.write(f"# bin_width_s: {self.bin_width_s!r}\n")
        buf.write("bin_start_s," + ",".join(f"rx{j}" for j in range(self.n_receivers)) + "\n")
        for i, start in enumerate(self.bin_starts()):
            buf.write(f"{start:.9g}," + ",".join(str(int(c)) for c in self.counts[:, i]) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "ChannelImpulseResponse":
        meta = {}
        rows = []
        header = None
        for line in text.splitlines():
            if not line.strip():
                continue
            if line.startswith("#"):
                if ":" in line:
                    k, v = line[1:].split(":", 1)
                    meta[k.strip()] = v.strip()
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append([int(v) for v in line.split(",")[1:]])
        if header is None or "bin_width_s" not in meta:
            raise ValueError("not a CIR table")
        counts = np.array(rows, dtype=np.int64).T.reshape(len(header) - 1, len(rows))
        return cls(float(meta["bin_width_s"]), counts, int(meta.get("emitted", 0)), meta.get("scenario_digest", ""))


class BinMismatch(ValueError):
    pass


@dataclass(frozen=True)
class MassLedger:
    emitted: int
    absorbed: tuple[int, ...]
    leaked: int
    degraded: int
    exited: int
    alive_at_end: int

    @property
    def total_absorbed(self) -> int:
        return sum(self.absorbed)

    def balanced(self) -> bool:
        return self.emitted == self.total_absorbed + self.leaked + self.degraded + self.exited + self.alive_at_end

    def to_dict(self) -> dict:
        return {
            "emitted": self.emitted,
            "absorbed": list(self.absorbed),
            "leaked": self.leaked,
            "degraded": self.degraded,
            "exited": self.exited,
            "alive_at_end": self.alive_at_end,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"

    def __add__(self, other: "MassLedger") -> "MassLedger":
        n = max(len(self.absorbed), len(other.absorbed))
        a = [0] * n
        for src in (self.absorbed, other.absorbed):
            for i, v in enumerate(src):
                a[i] += v
        return MassLedger(
            self.emitted + other.emitted,
            tuple(a),
            self.leaked + other.leaked,
            self.degraded + other.degraded,
            self.exited + other.exited,
            self.alive_at_end + other.alive_at_end,
        )


def ledger_from_events(events: ParticleEvents) -> MassLedger:
    fate = events.fate
    absorbed = tuple(
        int(np.count_nonzero((fate == ABSORBED) & (events.receiver == j))) for j in range(events.n_receivers)
    )
    return MassLedger(
        emitted=events.emitted,
        absorbed=absorbed,
        leaked=int(np.count_nonzero(fate == LEAKED_CODE)),
        degraded=int(np.count_nonzero(fate == DEGRADED)),
        exited=int(np.count_nonzero(fate == EXITED_CODE)),
        alive_at_end=int(np.count_nonzero(fate == ALIVE)),
    )


def n_bins_for(end_time_s: float, bin_width_s: float) -> int:
    return max(1, int(math.ceil(end_time_s / bin_width_s - 1e-9)))


def bin_events(
    events: ParticleEvents, bin_width_s: float, end_time_s: float, scenario_hash: str = ""
) -> ChannelImpulseResponse:
    n_bins = n_bins_for(end_time_s, bin_width_s)
    counts = np.zeros((max(events.n_receivers, 1), n_bins), dtype=np.int64)
    mask = events.fate == ABSORBED
    if mask.any():
        idx = np.floor(events.time_s[mask] / bin_width_s).astype(np.int64)
        np.clip(idx, 0, n_bins - 1, out=idx)
        np.add.at(counts, (events.receiver[mask], idx), 1)
    return ChannelImpulseResponse(bin_width_s, counts, events.emitted, scenario_hash)


@dataclass(frozen=True)
class CirStatistics:
    peak_amplitude: int
    peak_time_s: float
    first_arrival_s: float
    tau_s: float
    tail_fraction: float
    total: int = field(default=0)


def tail_fraction(cir: ChannelImpulseResponse, tau_s: float, receiver: int = 0) -> float:
    counts = cir.counts[receiver]
    total = counts.sum()
    if total == 0:
        raise EmptyCir("CIR has no absorbed molecules")
    after = cir.bin_starts() >= tau_s - 1e-12
    return float(counts[after].sum() / total)


def cir_statistics(cir: ChannelImpulseResponse, tau_s: float | None = None, receiver: int = 0) -> CirStatistics:
    """Peak, first arrival and tail fraction of one receiver's CIR.

    ``tau_s`` defaults to twice the peak time.  Peak ties resolve to the
    earliest bin.
    """
    counts = cir.counts[receiver]
    total = int(counts.sum())
    if total == 0:
        raise EmptyCir("CIR has no absorbed molecules")
    peak_bin = int(np.argmax(counts))
    starts = cir.bin_starts()
    peak_time = float(starts[peak_bin])
    first = float(starts[int(np.flatnonzero(counts)[0])])
    tau = 2.0 * peak_time if tau_s is None else float(tau_s)
    return CirStatistics(
        peak_amplitude=int(counts[peak_bin]),
        peak_time_s=peak_time,
        first_arrival_s=first,
        tau_s=tau,
        tail_fraction=tail_fraction(cir, tau, receiver),
        total=total,
    )
