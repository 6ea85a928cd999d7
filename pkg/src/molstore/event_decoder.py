"""Blockade-event detection and segment-level decoding of current traces.

Detection thresholds the trace against a rolling-median open-pore baseline.
Decoding stays at the level of homopolymer segments: individual bases cannot be
called because roughly a channel's worth of bases shapes the current at any
instant.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import functools

import numpy as np
from scipy import optimize, signal

from . import _kernels
from .codec import BASES
from .errors import BaselineError, ConfigError
from .nanopore_readout import (
    FILTER_ORDER,
    CurrentTrace,
    PoreModel,
    TranslocationDirection,
    bessel_sos,
    channel_window,
)


@dataclass(frozen=True)
class DetectorParams:
    threshold_fraction: float = 0.5
    min_duration_us: float = 10.0
    baseline_window: int = 1001  # samples
    baseline_quantile: float = 0.99
    min_baseline_pA: float = 60.0
    edge_samples: int = 2
    # bandwidth of the acquisition filter, if known; edges are then fitted with
    # its step response instead of taken at the half-amplitude crossing
    filter_bandwidth_khz: float | None = None

    def __post_init__(self):
        if not 0 < self.threshold_fraction < 1:
            raise ConfigError("threshold_fraction must lie in (0, 1)")
        if self.baseline_window < 1:
            raise ConfigError("baseline_window must be >= 1")
        if self.min_duration_us < 0:
            raise ConfigError("min_duration_us must be >= 0")


@dataclass
class BlockadeEvent:
    start: float  # s
    end: float  # s
    mean_blocked_current: float  # pA
    baseline: float  # pA
    depth_fraction: float
    classified_base: str | None = None
    estimated_base_count: int | None = None
    start_index: int = 0
    end_index: int = 0  # exclusive

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def duration_us(self) -> float:
        return (self.end - self.start) * 1e6

    def to_dict(self) -> dict:
        d = asdict(self)
        d["duration"] = self.duration
        return d


def rolling_baseline(trace: CurrentTrace, params: DetectorParams = DetectorParams()) -> np.ndarray:
    """Open-pore current at every sample.

    Median over the open samples (those above the threshold relative to a
    high-quantile reference) within a centered window, evaluated on a stride
    of anchors and linearly interpolated. Windows with no open sample inherit
    the nearest estimate.
    """
    x = trace.samples
    n = x.shape[0]
    if n == 0:
        raise BaselineError("empty trace")
    reference = float(np.quantile(x, params.baseline_quantile))
    if not np.isfinite(reference) or reference < params.min_baseline_pA:
        raise BaselineError(
            f"no open-pore level found: reference current {reference:.3g} pA is below "
            f"{params.min_baseline_pA} pA"
        )
    open_mask = x >= params.threshold_fraction * reference
    # a window longer than the trace degenerates to the whole-trace median
    half = min(params.baseline_window, n) // 2
    stride = max(1, half // 10)
    anchors = np.arange(0, n, stride, dtype=np.int64)
    if anchors[-1] != n - 1:
        anchors = np.append(anchors, n - 1)
    med = _kernels.masked_rolling_median(x, open_mask, anchors, half)
    ok = ~np.isnan(med)
    if not np.any(ok):
        raise BaselineError("no open-pore samples in trace")
    return np.interp(np.arange(n), anchors[ok], med[ok])


def _crossing(x, k, thr):
    """Fractional sample position in [k - 1, k] where ``x`` crosses ``thr``."""
    x0, x1 = x[k - 1], x[k]
    frac = 0.5 if x1 == x0 else min(1.0, max(0.0, (x0 - thr) / (x0 - x1)))
    return k - 1 + frac


@functools.lru_cache(maxsize=16)
def _step_template(bandwidth_khz: float):
    """Unit step response of the acquisition filter on a fine grid (us, value)."""
    fs = 400.0 * bandwidth_khz * 1e3
    n = int(40.0 * fs / (bandwidth_khz * 1e3))
    g = signal.sosfilt(bessel_sos(bandwidth_khz, fs), np.ones(n))
    t_us = np.arange(n) / fs * 1e6
    return t_us, g, float(np.interp(0.5, g[: np.argmax(g)], t_us[: np.argmax(g)]))


@functools.lru_cache(maxsize=16)
def filter_delay_us(bandwidth_khz: float) -> float:
    """Low-frequency group delay of the 4-pole Bessel acquisition filter, us.

    For an all-pole H(s) = b0 / (a_n s^n + ... + a1 s + a0) it is a1 / a0.
    """
    _, a = signal.bessel(FILTER_ORDER, 2 * np.pi * bandwidth_khz * 1e3, analog=True, norm="mag")
    return float(a[-2] / a[-1]) * 1e6


def _fit_edge(x, k, limit, dt_us, hi, lo, rising, bandwidth_khz, guess_us):
    """Time (us) of an instantaneous step, given its filtered and sampled image.

    ``guess_us`` is the half-amplitude crossing; the fit searches one sample
    either side of it after undoing the filter's half-rise delay. Samples on
    the far side of ``limit`` (the event midpoint) are left out.
    """
    t_g, g, t50 = _step_template(bandwidth_khz)
    width = int(math.ceil(2.0e3 / bandwidth_khz / dt_us)) + 2
    lo_i, hi_i = max(0, k - width), min(x.shape[0], k + width)
    if rising:
        lo_i = max(lo_i, limit)
    else:
        hi_i = min(hi_i, limit)
    idx = np.arange(lo_i, hi_i)
    t = idx * dt_us
    y = x[idx]
    step = hi - lo

    def cost(t0):
        resp = np.interp(t - t0, t_g, g, left=0.0, right=1.0)
        model = lo + step * resp if rising else hi - step * resp
        return float(np.sum((y - model) ** 2))

    c = guess_us - t50
    r = optimize.minimize_scalar(cost, bounds=(c - dt_us, c + dt_us), method="bounded",
                                 options={"xatol": 1e-4})
    return float(r.x)


def detect_events(trace: CurrentTrace, params: DetectorParams = DetectorParams()) -> list[BlockadeEvent]:
    """Maximal spans below ``threshold_fraction`` of the rolling baseline.

    The blocked level is averaged over the span minus ``edge_samples`` at each
    end; edges are then placed at the interpolated crossings of the level
    halfway between baseline and blocked current.
    """
    x = trace.samples
    dt = trace.sample_interval_us * 1e-6
    base = rolling_baseline(trace, params)
    thr = params.threshold_fraction * base
    starts, ends = _kernels.threshold_spans(x, thr)
    n = x.shape[0]
    events = []
    for s, e in zip(starts.tolist(), ends.tolist()):
        k = params.edge_samples
        core = x[s + k : e - k] if e - s > 2 * k else x[s:e]
        blocked = float(np.mean(core))
        b = float(np.mean(base[s:e]))
        # edges sit where the current crosses halfway between open and blocked
        # levels, which a linear-phase-like filter delays equally on both sides
        half = 0.5 * (b + blocked)
        i = s
        while i < e - 1 and x[i] >= half:
            i += 1
        while i > 0 and x[i - 1] < half:
            i -= 1
        t_start = 0.0 if i == 0 else _crossing(x, i, half) * dt
        j = e
        while j > i + 1 and x[j - 1] >= half:
            j -= 1
        while j < n and x[j] < half:
            j += 1
        t_end = n * dt if j >= n else _crossing(x, j, half) * dt
        bw = params.filter_bandwidth_khz
        if bw is not None and 0 < i and j < n and j - i >= 2:
            dt_us = dt * 1e6
            mid = (i + j + 1) // 2
            t_start = 1e-6 * _fit_edge(x, i, mid, dt_us, b, blocked, False, bw, t_start * 1e6)
            t_end = 1e-6 * _fit_edge(x, j, mid, dt_us, b, blocked, True, bw, t_end * 1e6)
        if (t_end - t_start) * 1e6 < params.min_duration_us:
            continue
        depth = min(1.0, max(0.0, 1.0 - blocked / b))
        events.append(BlockadeEvent(t_start, t_end, blocked, b, depth, start_index=s, end_index=e))
    return events


def mid_event_current(trace: CurrentTrace, event: BlockadeEvent) -> float:
    """Mean current over the central half of an event."""
    s, e = event.start_index, event.end_index
    q = (e - s) // 4
    return float(np.mean(trace.samples[s + q : e - q])) if e - s >= 4 else event.mean_blocked_current


# --- classification -----------------------------------------------------------


@dataclass(frozen=True)
class ClassifierParams:
    residual_tolerance: float = 0.30  # relative band on residual current
    dwell_tolerance: float = 0.40  # relative band on implied per-base dwell
    min_confidence: float = 0.5
    length_prior: int | None = None  # expected homopolymer length, bases
    candidates: str = BASES


def _band_score(measured, expected, tol):
    return max(0.0, 1.0 - abs(measured - expected) / (tol * expected))


def homopolymer_scores(
    event: BlockadeEvent, pore: PoreModel, params: ClassifierParams = ClassifierParams()
) -> dict[str, float]:
    """Confidence in [0, 1] that the event is a homopolymer of each base.

    Product of a residual-current band score and, when a length prior is
    given, the best dwell band score over the base's direction-dependent dwells.
    """
    scores = {}
    for b in params.candidates:
        s = _band_score(event.mean_blocked_current, pore.residual_pA[b], params.residual_tolerance)
        if params.length_prior:
            per_base = event.duration_us / params.length_prior
            s *= max(_band_score(per_base, d, params.dwell_tolerance) for d in pore.dwells(b))
        scores[b] = s
    return scores


def classify_homopolymer(
    event: BlockadeEvent, pore: PoreModel = PoreModel(), params: ClassifierParams = ClassifierParams()
) -> str | None:
    """Best-matching base, or None when no calibration band fits well enough."""
    scores = homopolymer_scores(event, pore, params)
    best = max(scores, key=scores.get)
    return best if scores[best] >= params.min_confidence else None


def estimate_base_count(
    event: BlockadeEvent,
    base: str,
    pore: PoreModel = PoreModel(),
    direction: TranslocationDirection | None = None,
    length_prior: int | None = None,
) -> int:
    """Strand length implied by the event duration and the base's dwell.

    Without a direction, a base with two dwells takes the one whose count lies
    closer to a multiple of ``length_prior``, or the shorter dwell when there
    is no prior.
    """
    if direction is not None:
        return int(round(event.duration_us / pore.dwell(base, direction)))
    dwells = pore.dwells(base)
    counts = [event.duration_us / d for d in dwells]
    if length_prior and len(dwells) > 1:

        def miss(n):
            k = max(1, round(n / length_prior))
            return abs(n - k * length_prior)

        return int(round(min(counts, key=miss)))
    return int(round(counts[0]))


def symbol_error_rate(decoded: str, truth: str) -> float:
    """Positional mismatch fraction; extra or missing symbols all count as errors."""
    n = max(len(decoded), len(truth))
    if n == 0:
        return 0.0
    m = min(len(decoded), len(truth))
    a = np.frombuffer(decoded[:m].encode(), dtype=np.uint8)
    b = np.frombuffer(truth[:m].encode(), dtype=np.uint8)
    return (int(np.count_nonzero(a != b)) + n - m) / n


def annotate_events(
    events: list[BlockadeEvent],
    pore: PoreModel = PoreModel(),
    params: ClassifierParams = ClassifierParams(),
) -> list[BlockadeEvent]:
    """Fill ``classified_base`` and ``estimated_base_count`` in place."""
    for ev in events:
        ev.classified_base = classify_homopolymer(ev, pore, params)
        if ev.classified_base is not None:
            ev.estimated_base_count = estimate_base_count(
                ev, ev.classified_base, pore, length_prior=params.length_prior
            )
    return events


def match_events(events: list[BlockadeEvent], annotations, slack_us: float = 0.0):
    """Pair detections with ground-truth intervals by largest overlap.

    Returns ``(pairs, unmatched_detections, unmatched_annotations)`` where
    pairs maps annotation index -> detection index.
    """
    pairs, used = {}, set()
    for ai, a in enumerate(annotations):
        best, best_ov = None, 0.0
        for di, ev in enumerate(events):
            if di in used:
                continue
            ov = min(ev.end * 1e6, a.end_us + slack_us) - max(ev.start * 1e6, a.start_us - slack_us)
            if ov > best_ov:
                best, best_ov = di, ov
        if best is not None:
            pairs[ai] = best
            used.add(best)
    return (
        pairs,
        [i for i in range(len(events)) if i not in used],
        [i for i in range(len(annotations)) if i not in pairs],
    )


# --- segment-level decoding of run-length encoded strands ---------------------


@dataclass
class SegmentDecode:
    symbols: str
    direction_dwell_us: dict[str, float]
    predicted_duration_us: float
    measured_duration_us: float
    score: float = 0.0


def _noise_sigma(trace: CurrentTrace, event: BlockadeEvent) -> float:
    """Robust open-pore noise level from the samples around the event."""
    x = trace.samples
    side = x[: event.start_index] if event.start_index >= 20 else x[event.end_index :]
    if side.shape[0] < 20:
        return 0.05
    d = np.diff(side)
    # differencing removes slow baseline drift; MAD of a difference is sqrt(2) sigma
    return max(0.05, 1.4826 * float(np.median(np.abs(d - np.median(d)))) / math.sqrt(2))


class _PrefixSums:
    def __init__(self, trace: CurrentTrace):
        x = trace.samples
        self.dt = trace.sample_interval_us
        self.n = x.shape[0]
        self.s1 = np.concatenate(([0.0], np.cumsum(x)))
        self.s2 = np.concatenate(([0.0], np.cumsum(x * x)))


def _run_templates(pore: PoreModel, run_length: int) -> np.ndarray:
    """Ideal level of every base step of a run, given the previous run's symbol.

    ``tpl[p, b, k]`` is the current while base k of a ``b`` run enters behind a
    ``p`` run; index p = 4 stands for "no previous run".
    """
    w = channel_window(pore)
    res = pore.residual_table()
    k = np.arange(run_length)
    new = np.minimum(k + 1, w)
    old = np.maximum(w - 1 - k, 0)
    tpl = np.empty((5, 4, run_length))
    for p in range(4):
        tpl[p] = (res[p] * old + res[:, None] * new) / (old + new)
    tpl[4] = res[:, None] * np.ones(run_length)
    return tpl


def _beam_decode(ps, event, run_length, n_runs, dwell, tpl, sigma, beam_width, delay_us, settle_us):
    """Beam search over run symbols; each path's clock follows its own symbols.

    A path scores sum(z**2 - 1) over the samples its runs cover, z being the
    residual against the predicted profile in noise units, so paths that
    cover different spans of the trace stay comparable. A wrong symbol shifts
    the clock of every later run and the path falls out of the beam.
    """
    r = run_length
    k = np.arange(r + 1)
    t0 = event.start * 1e6 + delay_us
    stop = event.end * 1e6 + delay_us - 0.5 * r * float(dwell.min())
    inv_var = 1.0 / sigma**2
    # samples within the filter's settling time of the event edges follow the
    # edge, not the occupancy model, and are left out
    i_lo = min(ps.n, max(0, int(math.ceil((t0 + settle_us) / ps.dt))))
    i_hi = max(i_lo, min(ps.n, int(math.floor((event.end * 1e6 + delay_us - settle_us) / ps.dt))))
    # beam state
    score = np.zeros(1)
    clock = np.array([t0])
    prev = np.array([4])
    nodes = [None]
    done = []
    j = 0
    while clock.size and (n_runs is None or j < n_runs):
        if n_runs is None:
            fin = clock >= stop
            done += [(score[i], clock[i] - delay_us, nodes[i]) for i in np.flatnonzero(fin)]
            keep = ~fin
            score, clock, prev = score[keep], clock[keep], prev[keep]
            nodes = [nd for nd, kp in zip(nodes, keep) if kp]
            if not clock.size or j > 10**6:
                break
        m = clock.size
        cand = np.tile(np.arange(4), m)
        par = np.repeat(np.arange(m), 4)
        d = dwell[cand]
        edges = clock[par, None] + d[:, None] * k[None, :]
        idx = np.clip(np.ceil(edges / ps.dt - 1e-9).astype(np.int64), i_lo, i_hi)
        cnt = np.diff(idx, axis=1)
        s1 = np.diff(ps.s1[idx], axis=1)
        s2 = np.diff(ps.s2[idx], axis=1)
        pred = tpl[prev[par], cand]
        sse = np.sum(s2 - 2.0 * pred * s1 + pred * pred * cnt, axis=1)
        new_score = score[par] + sse * inv_var - cnt.sum(axis=1)
        order = np.argsort(new_score, kind="stable")[:beam_width]
        score = new_score[order]
        clock = clock[par[order]] + r * d[order]
        prev = cand[order]
        nodes = [(nodes[par[o]], int(cand[o])) for o in order]
        j += 1
    done += [(score[i], clock[i] - delay_us, nodes[i]) for i in range(clock.size)]
    return done


def _unwind(node) -> str:
    syms = []
    while node is not None:
        node, c = node
        syms.append(BASES[c])
    return "".join(reversed(syms))


def decode_run_segments(
    trace: CurrentTrace,
    event: BlockadeEvent,
    pore: PoreModel = PoreModel(),
    run_length: int | None = None,
    n_runs: int | None = None,
    beam_width: int = 16,
    filter_bandwidth_khz: float | None = None,
) -> SegmentDecode:
    """Recover the symbol of each ``run_length``-base homopolymer run in one event.

    Runs must be at least a channel window long. Every run then has a stretch
    during which only its own bases occupy the channel, and the symbol whose
    residual matches the current there is the run's symbol. Both translocation
    directions are searched; the path that best fits the whole event, ramps
    between runs included, together with its measured duration wins. With
    ``filter_bandwidth_khz`` the predicted profile is delayed like the
    acquisition filter delays the trace.
    """
    w = channel_window(pore)
    if run_length is None:
        run_length = 2 * w
    if run_length < w:
        raise ConfigError(f"run_length {run_length} is shorter than the channel window {w}")
    measured = event.duration_us
    sigma = _noise_sigma(trace, event)
    sigma_t = 0.5 * trace.sample_interval_us
    delay_us = 0.0
    settle_us = trace.sample_interval_us
    if filter_bandwidth_khz is not None:
        delay_us = filter_delay_us(filter_bandwidth_khz)
        settle_us += 2.0 * delay_us
    ps = _PrefixSums(trace)
    tpl = _run_templates(pore, run_length)
    best = None
    for direction in TranslocationDirection:
        dwell = pore.dwell_table(direction)
        for score, t, node in _beam_decode(
            ps, event, run_length, n_runs, dwell, tpl, sigma, beam_width, delay_us, settle_us
        ):
            predicted = t - event.start * 1e6
            total = score + ((predicted - measured) / sigma_t) ** 2
            if best is None or total < best[0]:
                best = (total, node, predicted, direction)
    total, node, predicted, direction = best
    dwell_of = {b: pore.dwell(b, direction) for b in BASES}
    return SegmentDecode(_unwind(node), dwell_of, predicted, measured, float(total))
