"""End-to-end scenario runner for the storage chip.

store:  encode -> segment into homopolymer runs -> photochemical write -> park
fetch:  route -> transport to station -> translocate and record -> detect ->
        decode runs -> check payload -> transport back
erase:  route -> remove and destroy the strand, freeing the spot

Each station serves its spots first-in first-out; stations run independently,
so a scenario's report does not depend on the order in which stations are
simulated.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import chip_topology as chip
from .codec import (
    BITS_PER_BASE,
    DataBlock,
    decode_block,
    encode_block,
    expand_runs,
)
from .config import build_dataclass, parse_kv
from .errors import AddressingError, ConfigError, MolstoreError
from .event_decoder import DetectorParams, decode_run_segments, detect_events
from .nanopore_readout import (
    AcquisitionParams,
    PoreModel,
    channel_window,
    pore_from_kv,
    synthesize_trace,
)
from .transport_physics import FieldParams, Mode, ParticleModel, TransportMode, access_time
from .write_station import (
    Action,
    EraseMode,
    PhotochemicalStation,
    PrecursorStrand,
    erase_block,
    write_sequence,
)


@dataclass(frozen=True)
class Command:
    kind: str  # store | fetch | erase
    address: int
    payload: bytes | None = None

    def __post_init__(self):
        if self.kind not in ("store", "fetch", "erase"):
            raise ConfigError(f"unknown command {self.kind!r}")
        if self.kind == "store" and self.payload is None:
            raise ConfigError("store needs a payload")


@dataclass
class Scenario:
    layout: chip.ChipLayout = field(default_factory=chip.ChipLayout)
    pore: PoreModel = field(default_factory=PoreModel)
    acq: AcquisitionParams = field(default_factory=AcquisitionParams)
    transport: TransportMode = field(default_factory=TransportMode)
    particle: ParticleModel = field(default_factory=ParticleModel)
    field_params: FieldParams = field(default_factory=FieldParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    workload: list[Command] = field(default_factory=list)
    seed: int = 0
    run_length: int | None = None  # bases per symbol; default two channel windows
    station_overhead_s: float = 0.0
    write_action_s: float = 0.0
    lead_us: float = 2000.0  # open-pore recording before and after a strand
    beam_width: int = 16  # paths kept by the run decoder

    @property
    def effective_run_length(self) -> int:
        return self.run_length if self.run_length is not None else 2 * channel_window(self.pore)


@dataclass
class CommandResult:
    index: int
    kind: str
    address: int
    station: int | None = None
    start_s: float = 0.0
    latency_s: float = 0.0
    ok: bool = True
    error: str | None = None
    payload_ok: bool | None = None
    components: dict = field(default_factory=dict)


@dataclass
class RunReport:
    results: list[CommandResult]
    makespan_s: float
    station_busy_s: list[float]
    utilization: float
    payload_bits_read: int
    data_rate_bps: float
    dwell_limited_rate_bps: float
    aggregate_ceiling_bps: float
    symbol_density_bits_per_base: float
    densities: dict

    @property
    def payload_failures(self) -> int:
        return sum(1 for r in self.results if r.payload_ok is False)

    def latencies(self, kind: str | None = None) -> list[float]:
        return [r.latency_s for r in self.results if r.ok and (kind is None or r.kind == kind)]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["payload_failures"] = self.payload_failures
        fetch = self.latencies("fetch")
        d["fetch_latency_s"] = (
            {"mean": float(np.mean(fetch)), "min": min(fetch), "max": max(fetch)} if fetch else None
        )
        return d


def dwell_limited_rate(pore: PoreModel, bits_per_base: float = BITS_PER_BASE) -> float:
    """Readout ceiling of one station: bits per base over the fastest base dwell."""
    fastest_us = min(min(v) for v in pore.dwell_us.values())
    return bits_per_base / (fastest_us * 1e-6)


def parallel_station_rate(station_count: int, per_station_rate: float) -> float:
    if station_count < 1:
        raise ConfigError("station_count must be >= 1")
    return station_count * per_station_rate


def _stream_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


@dataclass
class _Parked:
    block: DataBlock
    molecule: str


class _Runner:
    def __init__(self, scenario: Scenario, traces_dir: Path | None):
        self.sc = scenario
        self.traces_dir = traces_dir
        self.spots: dict[int, _Parked] = {}
        self.clock = [0.0] * scenario.layout.station_count
        self.busy = [0.0] * scenario.layout.station_count
        self.bits_read = 0

    def transit(self) -> float:
        sc = self.sc
        return access_time(sc.layout.path_length_m, sc.particle, sc.transport, sc.field_params)

    def store(self, i, cmd, res):
        sc = self.sc
        chip.compute_route(sc.layout, cmd.address, chip.Direction.TO_SPOT)
        if cmd.address in self.spots:
            raise AddressingError(f"spot {cmd.address} is occupied; erase it first")
        block = DataBlock(cmd.payload, block_id=i)
        molecule = expand_runs(encode_block(block), sc.effective_run_length)
        durations = {a: sc.write_action_s for a in Action}
        station = PhotochemicalStation(action_durations=durations)
        write_sequence(station, molecule)
        self.spots[cmd.address] = _Parked(block, station.detach())
        res.components = {
            "write_s": station.elapsed_s,
            "transport_s": self.transit(),
            "overhead_s": sc.station_overhead_s,
            "bases": len(molecule),
        }

    def fetch(self, i, cmd, res):
        sc = self.sc
        chip.compute_route(sc.layout, cmd.address, chip.Direction.TO_STATION)
        parked = self.spots.get(cmd.address)
        if parked is None:
            raise AddressingError(f"spot {cmd.address} holds no block")
        acq = dataclasses.replace(sc.acq, rng_seed=_stream_seed(sc.seed, i), tail_us=sc.lead_us)
        trace = synthesize_trace([(parked.molecule, None, sc.lead_us)], sc.pore, acq)
        truth = trace.annotations[0]
        n_runs = len(parked.molecule) // sc.effective_run_length
        payload = None
        try:
            detector = sc.detector
            if detector.filter_bandwidth_khz is None and acq.filter_bandwidth_khz is not None:
                # the station knows its own acquisition filter
                detector = dataclasses.replace(detector, filter_bandwidth_khz=acq.filter_bandwidth_khz)
            events = detect_events(trace, detector)
            if not events:
                raise MolstoreError("no blockade event detected")
            event = max(events, key=lambda e: e.duration)
            dec = decode_run_segments(
                trace,
                event,
                sc.pore,
                sc.effective_run_length,
                n_runs,
                beam_width=sc.beam_width,
                filter_bandwidth_khz=acq.filter_bandwidth_khz,
            )
            payload = decode_block(dec.symbols).payload
            res.payload_ok = payload == parked.block.payload
        except MolstoreError as exc:
            res.payload_ok = False
            res.error = f"decode: {exc}"
        if res.payload_ok:
            self.bits_read += 8 * len(payload)
        res.components = {
            "transport_s": 2 * self.transit(),
            "readout_s": truth.duration_us * 1e-6,
            "overhead_s": sc.station_overhead_s,
            "direction": truth.direction,
            "bases": truth.length,
        }
        if self.traces_dir is not None:
            stem = self.traces_dir / f"fetch_{i:04d}_spot{cmd.address}"
            trace.to_csv(stem.with_suffix(".csv"))
            trace.write_annotations(stem.with_suffix(".events.json"))

    def erase(self, i, cmd, res):
        sc = self.sc
        chip.compute_route(sc.layout, cmd.address, chip.Direction.TO_STATION)
        parked = self.spots.pop(cmd.address, None)
        if parked is None:
            raise AddressingError(f"spot {cmd.address} holds no block")
        record = erase_block(
            EraseMode.DESTROY_AND_REWRITE,
            PrecursorStrand((0,) * len(parked.molecule), written=True),
            cmd.address,
        )
        res.components = {
            "transport_s": self.transit(),
            "overhead_s": sc.station_overhead_s,
            "disposed_sites": record.site_count,
        }

    def run(self) -> RunReport:
        sc = self.sc
        results = []
        for i, cmd in enumerate(sc.workload):
            res = CommandResult(i, cmd.kind, cmd.address)
            try:
                if not 0 <= cmd.address < sc.layout.spot_count:
                    raise AddressingError(
                        f"spot address {cmd.address} out of range for {sc.layout.spot_count} spots"
                    )
                res.station = chip.station_for_spot(sc.layout, cmd.address)
                getattr(self, cmd.kind)(i, cmd, res)
            except MolstoreError as exc:
                res.ok = False
                res.error = str(exc)
            if res.ok and res.station is not None:
                res.latency_s = sum(v for k, v in res.components.items() if k.endswith("_s"))
                res.start_s = self.clock[res.station]
                self.clock[res.station] += res.latency_s
                self.busy[res.station] += res.latency_s
            results.append(res)

        makespan = max(self.clock) if self.clock else 0.0
        n_st = sc.layout.station_count
        per_station = dwell_limited_rate(sc.pore)
        return RunReport(
            results=results,
            makespan_s=makespan,
            station_busy_s=list(self.busy),
            utilization=sum(self.busy) / (n_st * makespan) if makespan > 0 else 0.0,
            payload_bits_read=self.bits_read,
            data_rate_bps=self.bits_read / makespan if makespan > 0 else 0.0,
            dwell_limited_rate_bps=per_station,
            aggregate_ceiling_bps=parallel_station_rate(n_st, per_station),
            symbol_density_bits_per_base=BITS_PER_BASE / sc.effective_run_length,
            densities=chip.layout_report(sc.layout),
        )


def run(scenario: Scenario, traces_dir: str | Path | None = None) -> RunReport:
    if traces_dir is not None:
        traces_dir = Path(traces_dir)
        traces_dir.mkdir(parents=True, exist_ok=True)
    return _Runner(scenario, traces_dir).run()


# --- scenario files -----------------------------------------------------------

_SCENARIO_KEYS = {"seed", "run_length", "station_overhead_s", "write_action_s", "lead_us", "beam_width"}
_ACQ_KEYS = {f.name for f in dataclasses.fields(AcquisitionParams)} - {"rng_seed"}
_DETECTOR_KEYS = {f.name for f in dataclasses.fields(DetectorParams)} - {"filter_bandwidth_khz"}
_PARTICLE_KEYS = {"radius", "speed", "charge_per_base"}
_FIELD_KEYS = {"applied_voltage", "electrode_gap"}


def _parse_payload(spec: str, rng: np.random.Generator) -> bytes:
    kind, _, value = spec.partition(":")
    if kind == "hex":
        return bytes.fromhex(value)
    if kind == "text":
        return value.encode("utf-8")
    if kind == "random":
        return rng.integers(0, 256, int(value), dtype=np.uint8).tobytes()
    raise ConfigError(f"payload must be hex:, text: or random:, got {spec!r}")


def parse_scenario(text: str) -> Scenario:
    """Scenario from ``key = value`` settings plus ``store|fetch|erase`` command lines.

    ``store <addr> hex:<hex> | text:<utf8> | random:<nbytes>``; random payloads
    are drawn from the scenario seed.
    """
    kv_lines, cmd_lines = [], []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head = line.split(None, 1)[0].lower()
        (cmd_lines if head in ("store", "fetch", "erase") else kv_lines).append(line)
    kv = parse_kv("\n".join(kv_lines))

    def pick(keys):
        return {k: v for k, v in kv.items() if k in keys}

    used = set()
    layout = chip.layout_from_kv(kv)
    used |= set(chip.LAYOUT_KEYS)
    acq_vals = pick(_ACQ_KEYS)
    if acq_vals.get("filter_bandwidth_khz", "").lower() in ("none", "off", "0"):
        acq_vals["filter_bandwidth_khz"] = "none"
    acq = build_dataclass(AcquisitionParams, acq_vals)
    used |= _ACQ_KEYS
    detector = build_dataclass(DetectorParams, pick(_DETECTOR_KEYS))
    used |= _DETECTOR_KEYS
    particle = build_dataclass(ParticleModel, pick(_PARTICLE_KEYS))
    field_params = build_dataclass(FieldParams, pick(_FIELD_KEYS))
    used |= _PARTICLE_KEYS | _FIELD_KEYS
    pore, pore_keys = pore_from_kv(kv)
    used |= pore_keys
    mode = kv.get("transport_mode", Mode.IDEALIZED_SPHERE.value)
    transport = TransportMode(
        Mode(mode),
        float(kv.get("empirical_slowdown", 1.0e3)),
        float(kv["vesicle_mobility"]) if "vesicle_mobility" in kv else None,
    )
    used |= {"transport_mode", "empirical_slowdown", "vesicle_mobility"}
    unknown = set(kv) - used - _SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")

    seed = int(kv.get("seed", 0))
    rng = np.random.default_rng(seed)
    workload = []
    for line in cmd_lines:
        parts = line.split()
        kind = parts[0].lower()
        try:
            addr = int(parts[1], 0)
        except (IndexError, ValueError) as exc:
            raise ConfigError(f"bad command line {line!r}") from exc
        payload = _parse_payload(parts[2], rng) if kind == "store" and len(parts) > 2 else None
        workload.append(Command(kind, addr, payload))

    return Scenario(
        layout=layout,
        pore=pore,
        acq=acq,
        transport=transport,
        particle=particle,
        field_params=field_params,
        detector=detector,
        workload=workload,
        seed=seed,
        run_length=int(kv["run_length"]) if "run_length" in kv else None,
        station_overhead_s=float(kv.get("station_overhead_s", 0.0)),
        write_action_s=float(kv.get("write_action_s", 0.0)),
        lead_us=float(kv.get("lead_us", 2000.0)),
        beam_width=int(kv.get("beam_width", 16)),
    )


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text())


def write_report(report: RunReport, path: str | Path) -> None:
    text = json.dumps(report.to_dict(), indent=2, default=str) + "\n"
    if str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
