"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line.

    pytest tests/test_acceptance.py        # lines show even with output capture on
    python tests/test_acceptance.py        # same checks without pytest
"""

import math
import sys
import time

import numpy as np
import pytest

from molstore import chip_topology as chip
from molstore import transport_physics as phys
from molstore.codec import encode_block, expand_runs
from molstore.errors import ProtocolViolation
from molstore.event_decoder import (
    ClassifierParams,
    DetectorParams,
    classify_homopolymer,
    detect_events,
    homopolymer_scores,
    match_events,
    mid_event_current,
)
from molstore.nanopore_readout import (
    AcquisitionParams,
    CurrentTrace,
    PoreModel,
    TranslocationDirection,
    bessel_lowpass,
    channel_window,
    schedule_back_to_back,
    synthesize_trace,
)
from molstore.sim_orchestrator import Command, Scenario, run
from molstore.write_station import (
    ActivatorModel,
    PhotochemicalStation,
    PrecursorStrand,
    activate_pattern,
    min_spacer_length,
    splice,
    write_sequence,
)

pytestmark = pytest.mark.acceptance


def within(x, target, rel):
    return abs(x - target) <= rel * abs(target)


# --- criteria -------------------------------------------------------------------


def c1_access_time_chain():
    t = time.perf_counter()
    ch = phys.derivation_chain()
    u = ch["unrounded"]
    el = time.perf_counter() - t
    mb = u["block"]["megabytes"]
    ok = (
        u["reynolds"] == 10.0
        and within(u["drag_N"], 1e-7, 0.06)
        and within(u["charge_C"], 1e-10, 0.06)
        and within(u["block"]["bases"], 2.5e8, 0.06)
        and 58.0 <= mb <= 63.0
        and ch["rounded"]["block"]["megabytes"] <= 63.0
        and el < 1.0
    )
    return ok, (
        f"Re={u['reynolds']:g} F={u['drag_N']:.4g} N q={u['charge_C']:.4g} C "
        f"bases={u['block']['bases']:.4g} block={mb:.2f} MB (rounded chain "
        f"{ch['rounded']['block']['megabytes']:.1f} MB) in {el * 1e3:.1f} ms"
    )


def c2_addressing():
    t = time.perf_counter()
    lines_ok = chip.address_line_count(2**20) == 20 and chip.address_line_count(16) == 4
    layout = chip.ChipLayout(spot_count=2**10)
    bank = chip.ValveBank(layout)
    reached, vectors = set(), set()
    for a in range(layout.spot_count):
        route = chip.compute_route(layout, a)
        vectors.add(route.bits)
        bank.clear()
        bank.apply(route)
        reached.add(bank.trace())
        if bank.trace() != a:
            break
    el = time.perf_counter() - t
    bij = len(vectors) == len(reached) == 1024 and reached == set(range(1024))
    return lines_ok and bij and el < 1.0, (
        f"lines(2^20)={chip.address_line_count(2**20)} lines(16)={chip.address_line_count(16)}; "
        f"1024-spot route bijection {'holds' if bij else 'BROKEN'} in {el * 1e3:.0f} ms"
    )


def c3_density():
    budget = chip.StorageBudget(10**6, block_bytes=1e6, chip_side_cm=1.0, layer_thickness_um=10.0)
    a = chip.areal_density(budget)
    v = chip.volumetric_density(budget)
    return a == 1e12 and v == 1e15, f"areal={a:.6g} B/cm^2 volumetric={v:.6g} B/cm^3"


_ARROW = {TranslocationDirection.FIVE_TO_THREE: "5'->3'", TranslocationDirection.THREE_TO_FIVE: "3'->5'"}


def c4_waveforms():
    quiet = AcquisitionParams(noise_coefficient=0.0)
    pore = PoreModel()
    dt = quiet.sample_interval_us
    parts, ok = [], True
    for base, level, durations in (("A", 20.0, (396.0, 648.0)), ("C", 40.0, (180.0, 180.0))):
        for d, want in zip(TranslocationDirection, durations):
            tr = synthesize_trace([(base * 120, d, 2000.0)], pore, quiet)
            evs = detect_events(tr)
            t_us = tr.times_us
            plateau = float(np.mean(tr.samples[(t_us > 2000 + 0.2 * want) & (t_us < 2000 + 0.8 * want)]))
            dur = evs[0].duration_us if len(evs) == 1 else float("nan")
            ok &= abs(plateau - level) <= 1.0 and abs(dur - want) <= dt
            parts.append(f"{base}120 {_ARROW[d]}: {plateau:.2f} pA, {dur:.1f} us")
    mixed = ("A" * 20 + "C" * 20) * 3
    for d in TranslocationDirection:
        tr = synthesize_trace([(mixed, d, 2000.0)], pore, quiet)
        m = mid_event_current(tr, detect_events(tr)[0])
        ok &= within(m, 35.0, 0.25)
        parts.append(f"(20A20C)x3 {_ARROW[d]}: mid-event {m:.1f} pA")
    return ok, "; ".join(parts)


def _classify_batch(seqs, seed, params):
    specs = schedule_back_to_back(seqs, gap_us=300.0, lead_us=2000.0)
    tr = synthesize_trace(specs, PoreModel(), AcquisitionParams(rng_seed=seed))
    events = detect_events(tr)
    pairs, _, _ = match_events(events, tr.annotations)
    return tr, events, pairs


def c5_resolution_limit():
    pore = PoreModel()
    w = channel_window(pore)
    rng = np.random.default_rng(505)
    truth = rng.choice(list("AC"), 200)
    params = ClassifierParams(length_prior=120, candidates="AC")
    _, events, pairs = _classify_batch([b * 120 for b in truth], 51, params)
    correct = sum(
        1 for i, b in enumerate(truth) if i in pairs and classify_homopolymer(events[pairs[i]], pore, params) == b
    )
    acc = correct / len(truth)
    mixed = ("A" * 20 + "C" * 20) * 3
    _, events, pairs = _classify_batch([mixed] * 200, 52, params)
    low = sum(
        1
        for i in range(200)
        if i not in pairs or max(homopolymer_scores(events[pairs[i]], pore, params).values()) < params.min_confidence
    )
    frac = low / 200
    return 29 <= w <= 30 and acc == 1.0 and frac >= 0.95, (
        f"window={w}; 120A/120C accuracy={acc:.3f} over 200; "
        f"20-mer alternation below confidence {params.min_confidence} in {frac:.1%} of 200"
    )


def c6_noise_law():
    t = time.perf_counter()
    areas = np.array([250.0, 500.0, 1000.0, 1500.0, 2000.0])
    sig = []
    for i, area in enumerate(areas):
        acq = AcquisitionParams(bilayer_area_um2=area, rng_seed=600 + i)
        tr = synthesize_trace([], PoreModel(), acq, duration_us=(10_000 - 1) * acq.sample_interval_us)
        assert len(tr) == 10_000
        sig.append(float(np.std(tr.samples)))
    sig = np.array(sig)
    slope, icpt = np.polyfit(areas, sig, 1)
    r2 = 1 - np.sum((sig - (slope * areas + icpt)) ** 2) / np.sum((sig - sig.mean()) ** 2)
    el = time.perf_counter() - t
    return r2 > 0.99 and el < 10.0, (
        f"sigma={np.round(sig, 3).tolist()} pA, slope={slope:.5f} pA/um^2, R^2={r2:.5f}, {el:.2f} s"
    )


def _sine_gain(f_hz, bw_khz, dt_us):
    n_cycle = 1e6 / (f_hz * dt_us)
    n = int(max(40 * n_cycle, 4000))
    t = np.arange(n) * dt_us * 1e-6
    y = bessel_lowpass(CurrentTrace(np.sin(2 * np.pi * f_hz * t), dt_us), bw_khz).samples
    k = n // 2  # drop the start-up transient
    basis = np.column_stack([np.sin(2 * np.pi * f_hz * t[k:]), np.cos(2 * np.pi * f_hz * t[k:])])
    coef, *_ = np.linalg.lstsq(basis, y[k:], rcond=None)
    return float(np.hypot(*coef))


def c7_filter():
    dt_us = 0.5  # the fine grid the synthesizer filters on
    parts, ok = [], True
    for bw in (5.0, 20.0, 100.0):
        const = bessel_lowpass(CurrentTrace(np.full(20_000, 120.0), dt_us), bw).samples
        step = np.ones(40_000)
        step[0] = 0.0
        settled = bessel_lowpass(CurrentTrace(step, dt_us), bw).samples[-1]
        dc_err = max(float(np.max(np.abs(const / 120.0 - 1))), abs(settled - 1.0))
        fc = bw * 1e3
        freqs = np.geomspace(fc / 2, fc * 2, 41)
        gains = np.array([_sine_gain(f, bw, dt_us) for f in freqs])
        i = int(np.argmax(gains < 1 / math.sqrt(2)))
        g0, g1 = 20 * np.log10(gains[i - 1 : i + 1])
        lf = np.log(freqs[i - 1]) + (-3.0103 - g0) / (g1 - g0) * (np.log(freqs[i]) - np.log(freqs[i - 1]))
        f3 = math.exp(lf)
        ok &= dc_err <= 1e-6 and abs(f3 / fc - 1) <= 0.05
        parts.append(f"{bw:g} kHz: DC err {dc_err:.1e}, -3 dB at {f3 / 1e3:.2f} kHz")
    return ok, "; ".join(parts)


def _legal(blocked, gate, op):
    if op in ("deblock", "open"):
        return gate is None
    if op == "attach":
        return gate is not None and not blocked
    return gate is not None


def c8_write_protocols():
    rng = np.random.default_rng(808)
    exact = 0
    for _ in range(10):
        target = "".join(rng.choice(list("ACGT"), 1000))
        s = PhotochemicalStation()
        write_sequence(s, target)
        exact += s.sequence == target
    silent, raised, corrupt = 0, 0, 0
    ops = ("deblock", "open", "attach", "close")
    for _ in range(10_000):
        s = PhotochemicalStation()
        for _ in range(int(rng.integers(1, 25))):
            op = ops[int(rng.integers(0, 4))]
            legal = _legal(s.blocked, s.open_gate_base, op)
            before = (s.sequence, s.blocked, dict(s.gates))
            try:
                {"deblock": s.deblock, "attach": s.attach, "close": s.close_gate}.get(
                    op, lambda: s.open_gate("ACGT"[int(rng.integers(0, 4))])
                )()
                silent += not legal
            except ProtocolViolation:
                raised += 1
                corrupt += before != (s.sequence, s.blocked, dict(s.gates))
    far = ActivatorModel("far_field_optical", 200.0)
    round_trips = 0
    for _ in range(1000):
        bits = rng.integers(0, 2, int(rng.integers(1, 65))).tolist()
        strand = activate_pattern(PrecursorStrand.blank(len(bits)), bits, far)
        round_trips += splice(strand) == bits
    spacer = min_spacer_length(far)
    ok = exact == 10 and silent == 0 and corrupt == 0 and raised > 0 and round_trips == 1000 and spacer == 100.0
    return ok, (
        f"10/10 kilobase targets exact={exact == 10}; 10^4 schedules: {raised} illegal actions raised, "
        f"{silent} slipped through, {corrupt} corrupted state; splice round-trips {round_trips}/1000; "
        f"min spacer {spacer:g} nm"
    )


def c9_pump():
    lo = phys.pump_rotation_frequency(3.0)
    hi = phys.pump_rotation_frequency(9.0)
    grid = [phys.pump_rotation_frequency(p) for p in np.linspace(3.0, 9.0, 601)]
    mono = all(a < b for a, b in zip(grid, grid[1:]))
    return lo == 0.8 and hi == 5.0 and mono, f"3.0 mW -> {lo!r} Hz, 9.0 mW -> {hi!r} Hz, monotone={mono}"


def c10_end_to_end():
    t = time.perf_counter()
    rng = np.random.default_rng(1010)
    payloads = [rng.integers(0, 256, 250, dtype=np.uint8).tobytes() for _ in range(10)]
    spots = rng.permutation(16)[:10].tolist()
    work = [Command("store", a, p) for a, p in zip(spots, payloads)]
    work += [Command("fetch", a) for a in spots]
    sc = Scenario(
        layout=chip.ChipLayout(spot_count=16),
        acq=AcquisitionParams(noise_coefficient=0.0),
        workload=work,
        seed=10,
    )
    rep = run(sc)
    el = time.perf_counter() - t
    fetched = [r for r in rep.results if r.kind == "fetch"]
    all_ok = len(fetched) == 10 and all(r.payload_ok for r in fetched)
    rate = rep.dwell_limited_rate_bps
    return all_ok and within(rate, 2 / 1.5e-6, 0.01) and el < 60.0, (
        f"{sum(bool(r.payload_ok) for r in fetched)}/10 payloads byte-exact "
        f"({len(encode_block(payloads[0]))}-base blocks, {len(expand_runs(encode_block(payloads[0]), sc.effective_run_length))} "
        f"bases on the strand); dwell-limited rate {rate / 1e6:.3f} Mbit/s; {el:.1f} s"
    )


CRITERIA = [
    (1, "access-time chain", c1_access_time_chain),
    (2, "addressing", c2_addressing),
    (3, "density", c3_density),
    (4, "blockade waveforms", c4_waveforms),
    (5, "resolution limit", c5_resolution_limit),
    (6, "noise law", c6_noise_law),
    (7, "Bessel filter", c7_filter),
    (8, "write protocols", c8_write_protocols),
    (9, "micro-pump endpoints", c9_pump),
    (10, "end-to-end", c10_end_to_end),
]


def _line(num, name, ok, detail):
    return f"[{'PASS' if ok else 'FAIL'}] criterion {num:>2} {name}: {detail}"


@pytest.mark.parametrize("num,name,fn", CRITERIA, ids=[f"c{n}" for n, _, _ in CRITERIA])
def test_criterion(num, name, fn, capsys):
    ok, detail = fn()
    with capsys.disabled():
        print("\n" + _line(num, name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for num, name, fn in CRITERIA:
        ok, detail = fn()
        failed += not ok
        print(_line(num, name, ok, detail))
    sys.exit(1 if failed else 0)
