"""Command-line entry point: ``molstore <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import chip_topology as chip
from . import codec
from . import transport_physics as phys
from .config import read_kv
from .errors import MolstoreError


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2, default=str) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_encode(args):
    block = codec.DataBlock(Path(args.input).read_bytes(), args.block_id)
    seq = codec.encode_block(block)
    if args.run_length > 1:
        seq = codec.expand_runs(seq, args.run_length)
    codec.write_sequence_file(args.out, seq)


def cmd_decode(args):
    seq = codec.read_sequence_file(args.input)
    if args.run_length > 1:
        seq = codec.collapse_runs(seq, args.run_length)
    Path(args.out).write_bytes(codec.decode_block(seq).payload)


def cmd_layout(args):
    layout = chip.layout_from_kv(read_kv(args.config)) if args.config else chip.ChipLayout()
    _dump(chip.layout_report(layout))


def cmd_physics(args):
    kv = read_kv(args.config) if args.config else {}

    def f(key, default):
        return float(kv.get(key, default))

    fluid = phys.FluidParams(f("density", 1e3), f("viscosity", 1e-3))
    particle = phys.ParticleModel(f("radius", 5e-7), f("speed", 10.0), f("charge_per_base", 4e-19))
    field = phys.FieldParams(f("applied_voltage", 10.0), f("electrode_gap", 1e-2))
    mode = phys.TransportMode(phys.Mode.IDEALIZED_SPHERE, f("empirical_slowdown", 1e3))
    report = phys.derivation_chain(fluid, particle, field, f("path_length", 1e-2), mode)
    report["micro_pump_hz"] = {
        f"{p:g}_mW": phys.pump_rotation_frequency(p) for p in (3.0, 6.0, 9.0)
    }
    report["chamber_nL"] = {"150_um": phys.chamber_volume(150.0)}
    _dump(report)


def cmd_synth(args):
    from .nanopore_readout import (
        AcquisitionParams,
        PoreModel,
        acquisition_from_kv,
        pore_from_kv,
        schedule_back_to_back,
        synthesize_trace,
    )

    pore = pore_from_kv(read_kv(args.pore))[0] if args.pore else PoreModel()
    acq = acquisition_from_kv(read_kv(args.acq)) if args.acq else AcquisitionParams()
    seqs = [codec.validate_sequence(line.strip()) for line in Path(args.seq).read_text().splitlines()]
    seqs = [s for s in seqs if s]
    events = schedule_back_to_back(seqs, pore, gap_us=args.gap_us, lead_us=args.gap_us)
    trace = synthesize_trace(events, pore, acq)
    trace.to_csv(args.out)
    sidecar = Path(args.out).with_suffix(".events.json")
    trace.write_annotations(sidecar)
    print(f"{len(trace)} samples, {len(events)} events -> {args.out} (+ {sidecar.name})")


def cmd_detect(args):
    import dataclasses

    from .event_decoder import ClassifierParams, DetectorParams, annotate_events, detect_events
    from .nanopore_readout import CurrentTrace, PoreModel, pore_from_kv

    trace = CurrentTrace.from_csv(args.trace)
    params = DetectorParams(
        threshold_fraction=args.threshold,
        min_duration_us=args.min_duration_us,
        baseline_window=args.baseline_window,
        filter_bandwidth_khz=args.filter_khz,
    )
    pore = pore_from_kv(read_kv(args.pore))[0] if args.pore else PoreModel()
    cls = ClassifierParams(length_prior=args.length_prior, candidates=args.candidates)
    events = annotate_events(detect_events(trace, params), pore, cls)
    _dump(
        {
            "detector": dataclasses.asdict(params),
            "classifier": dataclasses.asdict(cls),
            "sample_interval_us": trace.sample_interval_us,
            "events": [e.to_dict() for e in events],
        },
        args.out,
    )


def cmd_write_sim(args):
    from .write_station import (
        ActivatorModel,
        PhotochemicalStation,
        PrecursorStrand,
        activate_pattern,
        splice,
        write_sequence,
    )

    target = codec.read_sequence_file(args.target)
    if args.scheme == "photochemical":
        station = PhotochemicalStation(precursor=args.precursor)
        entries = write_sequence(station, target)
        result = {"scheme": "photochemical", "strand": station.sequence}
    else:
        codes = codec.sequence_to_codes(target)
        if args.states == 4:
            pattern = codes.tolist()
        else:
            pattern = [int(c) for c in "".join(f"{v:02b}" for v in codes.tolist())]
        activator = ActivatorModel(args.activator, args.wavelength_nm, args.spot_size_nm)
        strand = PrecursorStrand.blank(
            len(pattern), spacer_length_nm=args.spacer_nm, n_states=args.states
        )
        strand = activate_pattern(strand, pattern, activator)
        entries = list(strand.log)
        result = {
            "scheme": "activator",
            "states": args.states,
            "spliced": "".join(map(str, splice(strand))),
        }
    result["actions"] = [e.to_dict() for e in entries]
    _dump(result, args.log)


def cmd_run(args):
    from .sim_orchestrator import load_scenario, run, write_report

    report = run(load_scenario(args.scenario), args.traces)
    write_report(report, args.report)
    failures = report.payload_failures
    print(
        f"{len(report.results)} commands, {failures} payload failures, "
        f"makespan {report.makespan_s:.6g} s"
    )
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="molstore", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("encode", help="binary file -> base-sequence file")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--block-id", type=int, default=0)
    s.add_argument("--run-length", type=int, default=1, help="repeat each base this many times")
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("decode", help="base-sequence file -> binary file")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--run-length", type=int, default=1)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("layout", help="address lines and storage densities of a chip layout")
    s.add_argument("--config")
    s.add_argument("--report", action="store_true", help="print the JSON report (default)")
    s.set_defaults(func=cmd_layout)

    s = sub.add_parser("physics", help="transport derivation chain as JSON")
    s.add_argument("--config")
    s.add_argument("--report", action="store_true", help="print the JSON report (default)")
    s.set_defaults(func=cmd_physics)

    s = sub.add_parser("synth", help="synthesize a current trace, one event per sequence line")
    s.add_argument("--seq", required=True)
    s.add_argument("--pore")
    s.add_argument("--acq")
    s.add_argument("--out", required=True)
    s.add_argument("--gap-us", type=float, default=2000.0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("detect", help="detect and classify blockade events in a trace CSV")
    s.add_argument("--trace", required=True)
    s.add_argument("--out", default="-")
    s.add_argument("--pore")
    s.add_argument("--threshold", type=float, default=0.5)
    s.add_argument("--min-duration-us", type=float, default=10.0)
    s.add_argument("--baseline-window", type=int, default=1001)
    s.add_argument("--filter-khz", type=float, help="acquisition filter bandwidth, for edge fitting")
    s.add_argument("--length-prior", type=int)
    s.add_argument("--candidates", default=codec.BASES)
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("write-sim", help="simulate a write station")
    s.add_argument("--target", required=True)
    s.add_argument("--scheme", choices=["photochemical", "activator"], default="photochemical")
    s.add_argument("--log", default="-")
    s.add_argument("--precursor", default="")
    s.add_argument("--states", type=int, choices=[2, 4], default=2)
    s.add_argument(
        "--activator",
        choices=["far_field_optical", "near_field_optical", "electric_tip"],
        default="far_field_optical",
    )
    s.add_argument("--wavelength-nm", type=float, default=200.0)
    s.add_argument("--spot-size-nm", type=float)
    s.add_argument("--spacer-nm", type=float, default=100.0)
    s.set_defaults(func=cmd_write_sim)

    s = sub.add_parser("run", help="run a storage scenario")
    s.add_argument("--scenario", required=True)
    s.add_argument("--report", default="-")
    s.add_argument("--traces")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args) or 0
    except (MolstoreError, OSError) as exc:
        print(f"molstore {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
