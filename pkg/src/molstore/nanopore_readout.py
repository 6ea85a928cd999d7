"""Ionic-current traces for strands translocating through an alpha-hemolysin-like pore.

While a strand is in the pore the current is the mean residual current of the
bases currently inside the channel (at most ``channel_window`` of them). Each
base advances the strand by one position after its own dwell time, so an event
lasts exactly the summed dwell of its bases.

Traces are built on a fine time grid (``oversample`` points per acquisition
interval), get white Gaussian noise whose sigma scales with bilayer area, go
through a 4-pole low-pass Bessel filter standing in for the amplifier's analog
filter, and are then sampled at the acquisition interval.
"""

from __future__ import annotations

import csv
import enum
import functools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import signal

from . import _kernels
from .codec import BASES, sequence_to_codes, validate_sequence
from .errors import ConfigError, SchedulingError


class TranslocationDirection(enum.Enum):
    FIVE_TO_THREE = "five_to_three"
    THREE_TO_FIVE = "three_to_five"


FIVE_TO_THREE = TranslocationDirection.FIVE_TO_THREE
THREE_TO_FIVE = TranslocationDirection.THREE_TO_FIVE
_DIR_INDEX = {FIVE_TO_THREE: 0, THREE_TO_FIVE: 1}

# A and C come from homopolymer recordings; G and T sit at thirds between them
# and are placeholders until calibrated.
PAPER_CALIBRATED = frozenset("AC")


def _third(a, c, k):
    return a + (c - a) * k / 3.0


DEFAULT_RESIDUAL_PA = {
    "A": 20.0,
    "G": _third(20.0, 40.0, 1),
    "T": _third(20.0, 40.0, 2),
    "C": 40.0,
}
# (five_to_three, three_to_five) microseconds per base
DEFAULT_DWELL_US = {
    "A": (3.3, 5.4),
    "G": (_third(3.3, 1.5, 1), _third(5.4, 1.5, 1)),
    "T": (_third(3.3, 1.5, 2), _third(5.4, 1.5, 2)),
    "C": (1.5, 1.5),
}

FILTER_BANDWIDTHS_KHZ = (5.0, 20.0, 100.0)
FILTER_ORDER = 4

# 40 um aperture
DEFAULT_BILAYER_AREA_UM2 = math.pi * 20.0**2
# Gives ~4 pA rms open-pore noise after the 100 kHz filter at the default
# acquisition settings; see noise_coefficient_for_rms.
DEFAULT_NOISE_COEFFICIENT = 0.00988


@dataclass(frozen=True)
class PoreModel:
    channel_length_nm: float = 10.0
    base_pitch_nm: float = 0.34
    open_current_pA: float = 120.0
    applied_bias_mV: float = 120.0
    residual_pA: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_RESIDUAL_PA))
    dwell_us: Mapping[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_DWELL_US)
    )

    def __post_init__(self):
        if self.channel_length_nm <= 0 or self.base_pitch_nm <= 0:
            raise ConfigError("channel length and base pitch must be positive")
        for b in BASES:
            if b not in self.residual_pA or b not in self.dwell_us:
                raise ConfigError(f"pore model lacks calibration for base {b}")
            r = self.residual_pA[b]
            if not 0 < r < self.open_current_pA:
                raise ConfigError(
                    f"residual current for {b} ({r} pA) must lie in (0, open current)"
                )
            if min(self.dwell_us[b]) <= 0:
                raise ConfigError(f"dwell for {b} must be positive")

    @property
    def channel_window(self) -> int:
        return channel_window(self)

    def dwell(self, base: str, direction: TranslocationDirection) -> float:
        return self.dwell_us[base][_DIR_INDEX[TranslocationDirection(direction)]]

    def dwells(self, base: str) -> tuple[float, ...]:
        """Distinct per-base dwell values over both directions, shortest first."""
        return tuple(sorted(set(self.dwell_us[base])))

    def residual_table(self) -> np.ndarray:
        return np.array([self.residual_pA[b] for b in BASES])

    def dwell_table(self, direction: TranslocationDirection) -> np.ndarray:
        return np.array([self.dwell(b, direction) for b in BASES])

    def calibration_report(self) -> dict:
        return {
            b: {
                "residual_pA": self.residual_pA[b],
                "dwell_us": {
                    FIVE_TO_THREE.value: self.dwell_us[b][0],
                    THREE_TO_FIVE.value: self.dwell_us[b][1],
                },
                "measured": b in PAPER_CALIBRATED,
            }
            for b in BASES
        }


def channel_window(pore: PoreModel) -> int:
    """Bases inside the channel at once."""
    return max(1, int(round(pore.channel_length_nm / pore.base_pitch_nm)))


class Resolvability(enum.Enum):
    RESOLVABLE = "resolvable"
    UNRESOLVABLE = "unresolvable"


def resolvability(segment_length: int, pore: PoreModel = PoreModel()) -> Resolvability:
    """Whether homopolymer segments of this length give their own current plateau."""
    if segment_length < 1:
        raise ValueError("segment_length must be >= 1")
    if segment_length < channel_window(pore):
        return Resolvability.UNRESOLVABLE
    return Resolvability.RESOLVABLE


@dataclass(frozen=True)
class BlockadeProfile:
    """Piecewise-constant current during one translocation, time zero at pore entry.

    Step i lasts from ``edges_us[i]`` to ``edges_us[i + 1]`` and carries
    ``levels_pA[i]``; outside ``[0, duration_us)`` the pore is open.
    """

    edges_us: np.ndarray
    levels_pA: np.ndarray
    open_current_pA: float

    @property
    def duration_us(self) -> float:
        return float(self.edges_us[-1])

    def __call__(self, t_us):
        t = np.asarray(t_us, dtype=np.float64)
        idx = np.searchsorted(self.edges_us, t, side="right") - 1
        inside = (idx >= 0) & (idx < self.levels_pA.shape[0])
        out = np.full(t.shape, self.open_current_pA)
        out[inside] = self.levels_pA[idx[inside]]
        return out


def ideal_blockade_profile(
    seq: str, pore: PoreModel = PoreModel(), direction=FIVE_TO_THREE
) -> BlockadeProfile:
    if not seq:
        raise ValueError("cannot translocate an empty sequence")
    direction = TranslocationDirection(direction)
    codes = sequence_to_codes(seq)
    res = pore.residual_table()[codes]
    dwell = pore.dwell_table(direction)[codes]
    levels = _kernels.window_means(res, channel_window(pore))
    edges = np.concatenate(([0.0], np.cumsum(dwell)))
    return BlockadeProfile(edges, levels, pore.open_current_pA)


@dataclass(frozen=True)
class AcquisitionParams:
    sample_interval_us: float = 5.0
    filter_bandwidth_khz: float | None = 100.0
    bilayer_area_um2: float = DEFAULT_BILAYER_AREA_UM2
    noise_coefficient: float = DEFAULT_NOISE_COEFFICIENT  # pA per um^2 of bilayer
    rng_seed: int = 0
    oversample: int = 10
    tail_us: float = 2000.0
    allow_any_bandwidth: bool = False

    def __post_init__(self):
        if self.sample_interval_us <= 0:
            raise ConfigError("sample_interval_us must be positive")
        if self.oversample < 1:
            raise ConfigError("oversample must be >= 1")
        if self.bilayer_area_um2 < 0 or self.noise_coefficient < 0:
            raise ConfigError("bilayer area and noise coefficient must be >= 0")
        bw = self.filter_bandwidth_khz
        if bw is not None and not self.allow_any_bandwidth and bw not in FILTER_BANDWIDTHS_KHZ:
            raise ConfigError(
                f"filter bandwidth {bw} kHz is not one of {FILTER_BANDWIDTHS_KHZ}; "
                "set allow_any_bandwidth to override"
            )

    @property
    def noise_sigma_pA(self) -> float:
        return self.noise_coefficient * self.bilayer_area_um2

    @property
    def fine_interval_us(self) -> float:
        return self.sample_interval_us / self.oversample


@dataclass(frozen=True)
class EventAnnotation:
    start_us: float
    end_us: float
    sequence_id: int
    length: int
    direction: str

    @property
    def duration_us(self) -> float:
        return self.end_us - self.start_us


@dataclass
class CurrentTrace:
    samples: np.ndarray  # pA
    sample_interval_us: float
    annotations: list[EventAnnotation] = field(default_factory=list)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_interval_us <= 0:
            raise ConfigError("sample_interval_us must be positive")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def times_us(self) -> np.ndarray:
        return np.arange(len(self)) * self.sample_interval_us

    @property
    def sample_rate_hz(self) -> float:
        return 1.0e6 / self.sample_interval_us

    def to_csv(self, path: str | Path) -> None:
        t = self.times_us * 1e-6
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "current_pA"])
            for ti, xi in zip(t, self.samples):
                w.writerow([repr(float(ti)), repr(float(xi))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "CurrentTrace":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[0] < 2:
            raise ConfigError("trace CSV needs at least two samples")
        dt_us = (data[1, 0] - data[0, 0]) * 1e6
        return cls(data[:, 1].copy(), round(dt_us, 9))

    def annotations_json(self) -> list[dict]:
        return [
            {
                "sequence_id": a.sequence_id,
                "start_s": a.start_us * 1e-6,
                "end_s": a.end_us * 1e-6,
                "length": a.length,
                "direction": a.direction,
            }
            for a in self.annotations
        ]

    def write_annotations(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.annotations_json(), indent=2) + "\n")


@functools.lru_cache(maxsize=64)
def bessel_sos(bandwidth_khz: float, sample_rate_hz: float, order: int = FILTER_ORDER):
    """Digital Bessel low-pass whose -3 dB point lands exactly on the bandwidth."""
    fc = bandwidth_khz * 1e3
    if not 0 < fc < sample_rate_hz / 2:
        raise ConfigError(
            f"filter bandwidth {bandwidth_khz} kHz must lie below the Nyquist frequency "
            f"{sample_rate_hz / 2e3:g} kHz"
        )
    return signal.bessel(order, fc, btype="low", norm="mag", output="sos", fs=sample_rate_hz)


def _lowpass(x: np.ndarray, bandwidth_khz: float, sample_rate_hz: float) -> np.ndarray:
    sos = bessel_sos(float(bandwidth_khz), float(sample_rate_hz))
    if x.shape[0] == 0:
        return x.copy()
    # start in steady state so the filter does not ring in from zero
    zi = signal.sosfilt_zi(sos) * x[0]
    y, _ = signal.sosfilt(sos, x, zi=zi)
    return y


def bessel_lowpass(trace: CurrentTrace, bandwidth_khz: float) -> CurrentTrace:
    y = _lowpass(trace.samples, bandwidth_khz, trace.sample_rate_hz)
    return CurrentTrace(y, trace.sample_interval_us, list(trace.annotations))


def noise_coefficient_for_rms(
    target_rms_pA: float, acq: AcquisitionParams = AcquisitionParams()
) -> float:
    """Noise coefficient giving ``target_rms_pA`` of open-pore noise in acquired samples.

    The filter passes a fraction ``sum(h**2)`` of white-noise power, h being its
    impulse response on the fine grid.
    """
    gain = 1.0
    if acq.filter_bandwidth_khz is not None:
        fs = 1e6 / acq.fine_interval_us
        sos = bessel_sos(float(acq.filter_bandwidth_khz), fs)
        n = int(50 * fs / (acq.filter_bandwidth_khz * 1e3)) + 64
        impulse = np.zeros(n)
        impulse[0] = 1.0
        h = signal.sosfilt(sos, impulse)
        gain = math.sqrt(float(np.sum(h**2)))
    return target_rms_pA / (gain * acq.bilayer_area_um2)


@dataclass(frozen=True)
class EventSpec:
    sequence: str
    direction: TranslocationDirection | None = None
    start_us: float = 0.0


def _as_spec(ev) -> EventSpec:
    if isinstance(ev, EventSpec):
        return ev
    seq, direction, start = ev
    return EventSpec(seq, None if direction is None else TranslocationDirection(direction), start)


def event_direction(acq: AcquisitionParams, index: int) -> TranslocationDirection:
    """Direction drawn 50/50 from the event's own RNG stream."""
    rng = np.random.default_rng([acq.rng_seed, index])
    return FIVE_TO_THREE if rng.random() < 0.5 else THREE_TO_FIVE


def schedule_back_to_back(
    sequences: Sequence[str],
    pore: PoreModel = PoreModel(),
    gap_us: float = 1000.0,
    lead_us: float = 1000.0,
    directions: Sequence | None = None,
) -> list[EventSpec]:
    """Start times leaving ``gap_us`` of open pore after the slowest possible passage."""
    specs, t = [], lead_us
    for i, seq in enumerate(sequences):
        d = None if directions is None else directions[i]
        if d is None:
            dur = max(ideal_blockade_profile(seq, pore, x).duration_us for x in TranslocationDirection)
        else:
            d = TranslocationDirection(d)
            dur = ideal_blockade_profile(seq, pore, d).duration_us
        specs.append(EventSpec(seq, d, t))
        t += dur + gap_us
    return specs


def synthesize_trace(
    events: Iterable,
    pore: PoreModel = PoreModel(),
    acq: AcquisitionParams = AcquisitionParams(),
    duration_us: float | None = None,
) -> CurrentTrace:
    """Sampled, noisy, filtered current for a schedule of translocation events.

    ``events`` holds EventSpec objects or ``(sequence, direction, start_us)``
    tuples; a direction of None is drawn from the seeded RNG.
    """
    specs = [_as_spec(e) for e in events]
    placed = []
    for i, ev in enumerate(specs):
        validate_sequence(ev.sequence)
        d = ev.direction if ev.direction is not None else event_direction(acq, i)
        prof = ideal_blockade_profile(ev.sequence, pore, d)
        placed.append((i, ev, d, prof))

    order = sorted(placed, key=lambda item: item[1].start_us)
    prev_end = 0.0
    for i, ev, d, prof in order:
        if ev.start_us < prev_end:
            raise SchedulingError(
                f"event {i} starts at {ev.start_us} us, before the previous one ends "
                f"at {prev_end} us"
            )
        prev_end = ev.start_us + prof.duration_us

    if duration_us is None:
        duration_us = prev_end + acq.tail_us
    dt, k = acq.sample_interval_us, acq.oversample
    n_out = int(math.floor(duration_us / dt + 1e-9)) + 1
    fdt = dt / k
    n_fine = n_out * k
    x = np.full(n_fine, pore.open_current_pA)

    annotations = []
    for i, ev, d, prof in order:
        end = ev.start_us + prof.duration_us
        j0 = max(0, int(math.ceil(ev.start_us / fdt - 1e-9)))
        j1 = min(n_fine, int(math.ceil(end / fdt - 1e-9)))
        if j1 > j0:
            t = np.arange(j0, j1) * fdt - ev.start_us
            x[j0:j1] = prof(t)
        annotations.append(EventAnnotation(ev.start_us, end, i, len(ev.sequence), d.value))
    annotations.sort(key=lambda a: a.sequence_id)

    sigma = acq.noise_sigma_pA
    if sigma > 0:
        rng = np.random.default_rng(acq.rng_seed)
        x += rng.normal(0.0, sigma, n_fine)
    if acq.filter_bandwidth_khz is not None:
        x = _lowpass(x, acq.filter_bandwidth_khz, 1e6 / fdt)
    return CurrentTrace(x[::k].copy(), dt, annotations)


_PORE_SCALARS = ("channel_length_nm", "base_pitch_nm", "open_current_pA", "applied_bias_mV")


def pore_from_kv(values: Mapping[str, str]) -> tuple[PoreModel, set[str]]:
    """PoreModel from flat keys; ``residual_<B>`` and ``dwell_<B> = fwd, rev`` override
    per-base calibration. Returns the model and the keys it consumed."""
    used = set()
    kwargs = {}
    for k in _PORE_SCALARS:
        if k in values:
            kwargs[k] = float(values[k])
            used.add(k)
    residual = dict(DEFAULT_RESIDUAL_PA)
    dwell = dict(DEFAULT_DWELL_US)
    for b in BASES:
        if f"residual_{b}" in values:
            residual[b] = float(values[f"residual_{b}"])
            used.add(f"residual_{b}")
        if f"dwell_{b}" in values:
            parts = [float(p) for p in values[f"dwell_{b}"].split(",")]
            if len(parts) == 1:
                parts = parts * 2
            if len(parts) != 2:
                raise ConfigError(f"dwell_{b} takes one or two values")
            dwell[b] = (parts[0], parts[1])
            used.add(f"dwell_{b}")
    return PoreModel(residual_pA=residual, dwell_us=dwell, **kwargs), used


def acquisition_from_kv(values: Mapping[str, str]) -> AcquisitionParams:
    from .config import build_dataclass

    vals = dict(values)
    if str(vals.get("filter_bandwidth_khz", "")).lower() in ("none", "off"):
        vals["filter_bandwidth_khz"] = "none"
    return build_dataclass(AcquisitionParams, vals)
