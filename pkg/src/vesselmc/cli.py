"""``vesselmc`` command line.

Every command that produces files writes them under ``--out`` together
with ``scenario.json`` (the exact scenario used) and ``manifest.json``.
Failures print one JSON error record on stderr and exit non-zero.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .channel import ChannelImpulseResponse, EmptyCir, cir_statistics, simulate_cir
from .comms import (
    DetectionConfig,
    LineCoding,
    ModulationKind,
    ModulationScheme,
    ReceptionMode,
    UnsupportedCharacter,
    bits_to_codes,
    codes_to_bits,
    default_threshold,
    ita2_decode,
    ita2_encode,
    simulate_mimo,
    synthetic_channel,
    transmit,
)
from .core import (
    PRESETS,
    MoleculeSpecies,
    ScenarioError,
    SimulationScenario,
    UnknownParameterPath,
    load_scenario,
    preset,
    save_scenario,
    set_parameter,
)
from .relay import (
    RelayChain,
    RelayHop,
    TooManyHops,
    compare_valve_aligned,
    simulate_relay_chain,
    valve_aligned_placement,
)
from .transport import classify_flow_regime

EXIT_NOT_FOUND = 2
EXIT_INVALID_SCENARIO = 3
EXIT_BAD_ARGUMENT = 4


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int = EXIT_BAD_ARGUMENT, **extra):
        super().__init__(message)
        self.record = {"error": kind, "message": message, **extra}
        self.code = code


# ------------------------------------------------------------------ helpers


class Run:
    """Collects output files for one command and writes the manifest."""

    def __init__(self, out: str | Path | None, command: str):
        self.out = Path(out) if out else None
        self.command = command
        self.files: list[str] = []
        self.t0 = time.perf_counter()

    def write(self, name: str, text: str) -> None:
        if self.out is None:
            return
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.files.append(name)

    def finish(self, scenario: SimulationScenario | None, seed: int | None) -> dict | None:
        if self.out is None:
            return None
        if scenario is not None:
            self.write("scenario.json", scenario.to_json())
        manifest = {
            "command": self.command,
            "scenario_digest": scenario.digest() if scenario is not None else None,
            "seed": seed,
            "version": __version__,
            "duration_s": round(time.perf_counter() - self.t0, 3),
            "files": sorted(self.files),
        }
        self.write("manifest.json", json.dumps(manifest, sort_keys=True, indent=2) + "\n")
        return manifest


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _scenario(args) -> SimulationScenario:
    if getattr(args, "scenario", None):
        path = Path(args.scenario)
        if not path.exists():
            raise CliError("FileNotFound", f"scenario file {path} does not exist", EXIT_NOT_FOUND, path=str(path))
        sc = load_scenario(path)
    else:
        sc = preset(args.preset or "vein")
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise CliError("BadArgument", f"--set expects path=value, got {item!r}")
        key, value = item.split("=", 1)
        sc = set_parameter(sc, key.strip(), _parse_value(value))
    if getattr(args, "seed", None) is not None:
        sc = sc.replace(seed=args.seed)
    if getattr(args, "molecules", None) is not None and args.command in ("cir", "mimo"):
        sc = sc.replace(molecules_per_emission=args.molecules)
    return sc


def _emit(record) -> None:
    sys.stdout.write(json.dumps(record, sort_keys=True, indent=2) + "\n")


def _cir_summary(cir: ChannelImpulseResponse, tau_s: float | None = None) -> dict:
    try:
        st = cir_statistics(cir, tau_s)
    except EmptyCir:
        return {"total_absorbed": 0, "peak_amplitude": 0, "peak_time_s": None, "first_arrival_s": None,
                "tau_s": tau_s, "tail_fraction": None}  # fmt: skip
    return {
        "total_absorbed": st.total,
        "peak_amplitude": st.peak_amplitude,
        "peak_time_s": st.peak_time_s,
        "first_arrival_s": st.first_arrival_s,
        "tau_s": st.tau_s,
        "tail_fraction": st.tail_fraction,
    }


# ------------------------------------------------------------------ commands


def cmd_cir(args) -> int:
    sc = _scenario(args)
    run = Run(args.out, "cir")
    cir, ledger = simulate_cir(sc, workers=args.workers, bin_width_s=args.bin_width)
    run.write("cir.csv", cir.to_text())
    run.write("ledger.json", json.dumps(ledger.to_dict(), sort_keys=True, indent=2) + "\n")
    run.finish(sc, sc.seed)
    _emit({"scenario_digest": sc.digest(), "ledger": ledger.to_dict(), "balanced": ledger.balanced(),
           **_cir_summary(cir, args.tau)})  # fmt: skip
    return 0


def cmd_regime(args) -> int:
    sc = _scenario(args)
    report = classify_flow_regime(sc.geometry, sc.flow, sc.species[0])
    run = Run(args.out, "regime")
    run.write("regime.json", json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    run.finish(sc, sc.seed)
    _emit(report.to_dict())
    return 0


def _scheme(args) -> ModulationScheme:
    n = args.molecules
    T = args.symbol_duration
    if args.scheme == "bcsk":
        return ModulationScheme.bcsk(n, T)
    if args.scheme == "csk":
        levels = [int(v) for v in args.levels.split(",")] if args.levels else [round(n * k / 3) for k in range(4)]
        return ModulationScheme.csk(levels, T)
    if args.scheme == "ppm":
        return ModulationScheme.ppm(args.slots, n, T)
    return ModulationScheme.mosk([0, 1], n, T)


def _channel(args, scheme: ModulationScheme):
    """``(channel, cir_estimate, scenario)`` for the link commands."""
    if args.channel:
        cir = synthetic_channel(args.channel, scheme.slot_duration_s)
        return cir, cir, None
    if args.cir:
        path = Path(args.cir)
        if not path.exists():
            raise CliError("FileNotFound", f"CIR file {path} does not exist", EXIT_NOT_FOUND, path=str(path))
        cir = ChannelImpulseResponse.from_text(path.read_text())
        return cir, cir, None
    sc = _scenario(args)
    if scheme.kind is ModulationKind.MOSK:
        if len(sc.species) < 2:
            first = sc.species[0]
            sc = sc.replace(species=(first, MoleculeSpecies(1, first.diffusion_um2_s, first.degradation_rate_per_s)))
        est = {s: simulate_cir(sc, species_id=s, workers=args.workers)[0] for s in (0, 1)}
    else:
        est = simulate_cir(sc, workers=args.workers)[0]
    channel = sc if ReceptionMode(args.mode) is ReceptionMode.FULL_PARTICLE else est
    return channel, est, sc


def _detection(args, scheme: ModulationScheme, estimate) -> DetectionConfig:
    threshold = None
    if scheme.kind is ModulationKind.CSK:
        if args.threshold:
            threshold = [float(v) for v in str(args.threshold).split(",")]
            threshold = threshold[0] if len(threshold) == 1 else tuple(threshold)
        else:
            ref = estimate[0] if isinstance(estimate, dict) else estimate
            threshold = default_threshold(ref, scheme)
    if args.detector == "adaptive":
        memory = args.isi_memory
        if memory is None:
            # by default remember every symbol the CIR estimate still reaches
            ref = estimate[0] if isinstance(estimate, dict) else estimate
            memory = max(1, ref.per_slot(scheme.symbol_duration_s).size - 1)
        return DetectionConfig.adaptive(threshold, memory)
    return DetectionConfig.fixed(threshold)


def _seeds(args) -> list[int]:
    return [args.seed + i for i in range(args.seeds)]


def cmd_ber(args) -> int:
    scheme = _scheme(args)
    channel, estimate, sc = _channel(args, scheme)
    detection = _detection(args, scheme, estimate)
    run = Run(args.out, "ber")
    rows = []
    for seed in _seeds(args):
        bits = np.random.default_rng(seed).integers(0, 2, args.bits)
        res = transmit(bits, scheme, channel, detection, rng=seed, mode=args.mode, coding=args.coding,
                       cir_estimate=estimate, workers=args.workers)  # fmt: skip
        rows.append({"seed": seed, "ber": res.ber, "data_bits": int(bits.size), "channel_bits": res.channel_bits,
                     "molecules": res.molecules})  # fmt: skip
    bers = np.array([r["ber"] for r in rows])
    summary = {
        "mean": float(bers.mean()),
        "stderr": float(bers.std(ddof=1) / math.sqrt(bers.size)) if bers.size > 1 else 0.0,
        "seeds": len(rows),
        "channel_bits_per_data_bit": rows[0]["channel_bits"] / rows[0]["data_bits"] if rows[0]["data_bits"] else None,
    }
    run.write("ber.csv", _ber_table(rows, summary))
    run.finish(sc, args.seed)
    _emit({"rows": rows, "summary": summary, "detector": args.detector, "coding": args.coding})
    return 0


def _ber_table(rows, summary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "ber", "data_bits", "channel_bits", "molecules"])
    for r in rows:
        w.writerow([r["seed"], repr(r["ber"]), r["data_bits"], r["channel_bits"], r["molecules"]])
    w.writerow(["mean", repr(summary["mean"]), "", "", ""])
    w.writerow(["stderr", repr(summary["stderr"]), "", "", ""])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    values = [v for v in (args.values or "").split(",") if v.strip()]
    base = _scenario(args)
    out = Path(args.out) if args.out else None
    rows = []
    tau = args.tau
    for raw in values:
        value = _parse_value(raw.strip())
        sc = set_parameter(base, args.param, value)
        sub = out / f"{args.param.replace('.', '_')}={raw.strip()}" if out else None
        run = Run(sub, f"sweep:{args.downstream}")
        if args.downstream == "cir":
            cir, ledger = simulate_cir(sc, workers=args.workers, bin_width_s=args.bin_width)
            if tau is None:
                try:
                    tau = 2.0 * cir_statistics(cir).peak_time_s
                except EmptyCir:
                    pass
            run.write("cir.csv", cir.to_text())
            run.write("ledger.json", json.dumps(ledger.to_dict(), sort_keys=True, indent=2) + "\n")
            rows.append({"value": value, "seed": sc.seed, **_cir_summary(cir, tau)})
        else:
            report = classify_flow_regime(sc.geometry, sc.flow, sc.species[0])
            rows.append({"value": value, "seed": sc.seed, **report.to_dict()})
        run.finish(sc, sc.seed)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        (out / "summary.csv").write_text(buf.getvalue())
    _emit({"param": args.param, "runs": rows})
    return 0


def cmd_text(args) -> int:
    scheme = _scheme(args)
    codes = ita2_encode(args.message)
    bits = codes_to_bits(codes)
    channel, estimate, sc = _channel(args, scheme)
    detection = _detection(args, scheme, estimate)
    run = Run(args.out, "text")
    results = []
    for seed in _seeds(args):
        if bits.size == 0:
            results.append({"seed": seed, "sent": "", "received": "", "bit_errors": 0, "bits_compared": 0,
                            "ber": 0.0})  # fmt: skip
            continue
        res = transmit(bits, scheme, channel, detection, rng=seed, mode=args.mode, coding=args.coding,
                       cir_estimate=estimate, workers=args.workers)  # fmt: skip
        errors = int(np.count_nonzero(res.sent != res.received))
        results.append({
            "seed": seed,
            "sent": args.message.upper(),
            "received": ita2_decode(bits_to_codes(res.received)),
            "bit_errors": errors,
            "bits_compared": int(bits.size),
            "ber": res.ber,
        })  # fmt: skip
    run.write("text.json", json.dumps(results, sort_keys=True, indent=2) + "\n")
    run.finish(sc, args.seed)
    _emit(results)
    return 0


def cmd_relay(args) -> int:
    scheme = _scheme(args)
    run = Run(args.out, "relay")
    sc = None
    if args.channel:
        cir = synthetic_channel(args.channel, scheme.slot_duration_s)
        det = _detection(args, scheme, cir)
        chain = RelayChain([RelayHop(cir, det) for _ in range(args.hops)], scheme, args.delay)
    else:
        sc = _scenario(args)
        if args.compare:
            record = compare_valve_aligned(sc, args.hops, molecules_per_bit=args.molecules,
                                           symbol_duration_s=args.symbol_duration, seeds=_seeds(args),
                                           n_bits=args.bits, isi_memory=args.isi_memory, workers=args.workers)  # fmt: skip
            run.write("relay_compare.json", json.dumps(record, sort_keys=True, indent=2) + "\n")
            run.finish(sc, args.seed)
            _emit(record)
            return 0
        placed = valve_aligned_placement(sc, args.hops, scheme, DetectionConfig.fixed(), processing_delay_s=args.delay)
        hops = []
        for hop in placed.hops:
            # each segment gets a threshold from its own impulse response
            cir = simulate_cir(hop.channel, workers=args.workers)[0]
            channel = hop.channel if ReceptionMode(args.mode) is ReceptionMode.FULL_PARTICLE else cir
            hops.append(RelayHop(channel, _detection(args, scheme, cir)))
        chain = RelayChain(hops, scheme, args.delay, placed.boundaries_um)
    reports = []
    for seed in _seeds(args):
        bits = np.random.default_rng(seed).integers(0, 2, args.bits)
        rep = simulate_relay_chain(chain, bits, seed, mode=args.mode, workers=args.workers)
        reports.append({"seed": seed, **rep.to_dict()})
    record = {"hops": len(chain.hops), "boundaries_um": list(chain.boundaries_um), "runs": reports}
    run.write("relay.json", json.dumps(record, sort_keys=True, indent=2) + "\n")
    run.finish(sc, args.seed)
    _emit(record)
    return 0


def cmd_mimo(args) -> int:
    sc = _scenario(args)
    if len(sc.receivers) == 1:
        # mirror the receiver across the duct axis to get a 2x2 link
        rx = sc.receivers[0]
        sc = sc.replace(receivers=(rx, dataclasses.replace(rx, wall_anchor_angle_rad=rx.wall_anchor_angle_rad + math.pi)))
    run = Run(args.out, "mimo")
    link = simulate_mimo(sc, workers=args.workers, bin_width_s=args.bin_width)
    totals = [[link.h(i, j).total() for j in range(link.n_rx)] for i in range(link.n_tx)]
    for i in range(link.n_tx):
        for j in range(link.n_rx):
            run.write(f"h{i + 1}{j + 1}.csv", link.h(i, j).to_text())
    run.finish(sc, sc.seed)
    _emit({"totals": totals, "n_tx": link.n_tx, "n_rx": link.n_rx})
    return 0


def cmd_preset(args) -> int:
    sc = preset(args.name)
    if args.out:
        save_scenario(sc, args.out)
    else:
        sys.stdout.write(sc.to_json())
    return 0


# ------------------------------------------------------------------ parser


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--scenario", help="scenario JSON file")
    g.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario (default: vein)")
    p.add_argument("--set", action="append", metavar="PATH=VALUE", help="override a scenario field")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--workers", type=int, default=1, help="worker threads (never changes results)")
    p.add_argument("--out", help="output directory")


def _add_link_args(p: argparse.ArgumentParser, bits: int = 1000) -> None:
    p.add_argument("--scheme", choices=["bcsk", "csk", "ppm", "mosk"], default="bcsk")
    p.add_argument("--molecules", type=int, default=1000, help="molecules per emission")
    p.add_argument("--levels", help="CSK molecule counts, comma separated")
    p.add_argument("--slots", type=int, default=4, help="PPM slots per symbol")
    p.add_argument("--symbol-duration", type=float, default=1.0)
    p.add_argument("--detector", choices=["fixed", "adaptive"], default="fixed")
    p.add_argument("--threshold", help="CSK threshold(s); default is the midpoint of expected counts")
    p.add_argument("--isi-memory", type=int, help="symbols of ISI memory (default: the CIR estimate's length)")
    p.add_argument("--coding", choices=[c.value for c in LineCoding], default="none")
    p.add_argument("--mode", choices=[m.value for m in ReceptionMode], default="semi-analytic")
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    p.add_argument("--bits", type=int, default=bits)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--channel", choices=["zero-isi", "high-isi"], help="synthetic channel instead of a scenario")
    src.add_argument("--cir", help="CIR table written by 'vesselmc cir'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vesselmc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cir", help="simulate one impulse and write the CIR and mass ledger")
    _add_scenario_args(p)
    _add_common(p)
    p.add_argument("--molecules", type=int, help="override molecules per emission")
    p.add_argument("--bin-width", type=float, help="CIR bin width in seconds (default 10 time steps)")
    p.add_argument("--tau", type=float, help="tail cut-off for the summary (default 2x peak time)")
    p.set_defaults(func=cmd_cir)

    p = sub.add_parser("regime", help="Peclet number, dispersion factor and flow regime")
    _add_scenario_args(p)
    _add_common(p)
    p.set_defaults(func=cmd_regime)

    p = sub.add_parser("ber", help="bit error rate over one or more seeds")
    _add_scenario_args(p)
    _add_common(p)
    _add_link_args(p)
    p.set_defaults(func=cmd_ber, seed=0)

    p = sub.add_parser("sweep", help="run a command over values of one scenario field")
    _add_scenario_args(p)
    _add_common(p)
    p.add_argument("--param", required=True, help="dotted scenario path, or a unique field name")
    p.add_argument("--values", default="", help="comma separated values")
    p.add_argument("--downstream", choices=["cir", "regime"], default="cir")
    p.add_argument("--bin-width", type=float)
    p.add_argument("--tau", type=float, help="tail cut-off (default 2x the first run's peak time)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("text", help="send a message through the ITA2 + CSK pipeline")
    _add_scenario_args(p)
    _add_common(p)
    _add_link_args(p)
    p.add_argument("message")
    p.set_defaults(func=cmd_text, seed=0)

    p = sub.add_parser("relay", help="decode-and-forward chain over valve-aligned segments")
    _add_scenario_args(p)
    _add_common(p)
    _add_link_args(p)
    p.add_argument("--hops", type=int, default=2)
    p.add_argument("--delay", type=float, default=0.0, help="relay processing delay in seconds")
    p.add_argument("--compare", action="store_true",
                   help="compare the valve-aligned chain with one end-to-end link at the same molecule budget")  # fmt: skip
    p.set_defaults(func=cmd_relay, seed=0)

    p = sub.add_parser("mimo", help="2x2 channel matrix from per-transmitter runs")
    _add_scenario_args(p)
    _add_common(p)
    p.add_argument("--molecules", type=int, help="override molecules per emission")
    p.add_argument("--bin-width", type=float)
    p.set_defaults(func=cmd_mimo)

    p = sub.add_parser("preset", help="print or save a built-in scenario")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--out", help="file to write")
    p.set_defaults(func=cmd_preset)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        err = e.record, e.code
    except ScenarioError as e:
        err = {"error": "ScenarioError", "message": str(e),
               "violations": [{"kind": v.kind, "path": v.path, "message": v.message} for v in e.violations]}, EXIT_INVALID_SCENARIO  # fmt: skip
    except FileNotFoundError as e:
        err = {"error": "FileNotFound", "message": str(e)}, EXIT_NOT_FOUND
    except UnknownParameterPath as e:
        err = {"error": "UnknownParameterPath", "message": str(e.args[0] if e.args else e)}, EXIT_BAD_ARGUMENT
    except (UnsupportedCharacter, TooManyHops, ValueError) as e:
        err = {"error": type(e).__name__, "message": str(e)}, EXIT_BAD_ARGUMENT
    record, code = err
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
