import math

import numpy as np
import pytest

from molstore.errors import ConfigError, SchedulingError
from molstore.nanopore_readout import (
    FIVE_TO_THREE,
    THREE_TO_FIVE,
    AcquisitionParams,
    CurrentTrace,
    EventSpec,
    PoreModel,
    Resolvability,
    bessel_lowpass,
    channel_window,
    ideal_blockade_profile,
    noise_coefficient_for_rms,
    pore_from_kv,
    resolvability,
    schedule_back_to_back,
    synthesize_trace,
)

QUIET = AcquisitionParams(noise_coefficient=0.0, filter_bandwidth_khz=None, oversample=1)


def test_channel_window():
    assert channel_window(PoreModel()) == 29
    assert channel_window(PoreModel(channel_length_nm=0.34)) == 1
    assert channel_window(PoreModel(channel_length_nm=20.0)) == 59


def test_resolvability():
    assert resolvability(20) is Resolvability.UNRESOLVABLE
    assert resolvability(120) is Resolvability.RESOLVABLE
    assert resolvability(29) is Resolvability.RESOLVABLE
    assert resolvability(28) is Resolvability.UNRESOLVABLE
    with pytest.raises(ValueError):
        resolvability(0)


def test_profile_a120_both_directions():
    p = ideal_blockade_profile("A" * 120, direction=FIVE_TO_THREE)
    assert p.duration_us == pytest.approx(396.0)
    assert np.all(p.levels_pA == 20.0)
    p = ideal_blockade_profile("A" * 120, direction=THREE_TO_FIVE)
    assert p.duration_us == pytest.approx(648.0)


def test_profile_c120():
    p = ideal_blockade_profile("C" * 120)
    assert p.duration_us == pytest.approx(180.0)
    assert p(90.0) == 40.0
    assert p(-1.0) == 120.0 and p(180.0) == 120.0


def test_profile_single_base():
    p = ideal_blockade_profile("A")
    assert list(p.levels_pA) == [20.0]
    assert p.duration_us == pytest.approx(3.3)


def _occupancy_oracle(seq, pore, direction):
    # step-by-step mean over the last <= W residuals, written as a plain loop
    w = channel_window(pore)
    levels, t, edges = [], 0.0, [0.0]
    for i, b in enumerate(seq):
        inside = seq[max(0, i - w + 1) : i + 1]
        levels.append(sum(pore.residual_pA[c] for c in inside) / len(inside))
        t += pore.dwell(b, direction)
        edges.append(t)
    return np.array(levels), np.array(edges)


def test_profile_matches_occupancy_oracle(rng):
    pore = PoreModel()
    for _ in range(10):
        seq = "".join(rng.choice(list("ACGT"), rng.integers(1, 200)))
        for d in (FIVE_TO_THREE, THREE_TO_FIVE):
            p = ideal_blockade_profile(seq, pore, d)
            levels, edges = _occupancy_oracle(seq, pore, d)
            np.testing.assert_allclose(p.levels_pA, levels, rtol=1e-12)
            np.testing.assert_allclose(p.edges_us, edges, rtol=1e-12)


def test_mixed_20a20c_mid_event():
    seq = ("A" * 20 + "C" * 20) * 3
    for d in (FIVE_TO_THREE, THREE_TO_FIVE):
        p = ideal_blockade_profile(seq, direction=d)
        t = np.linspace(0.25 * p.duration_us, 0.75 * p.duration_us, 2001)
        mid = float(np.mean(p(t)))
        assert abs(mid - 35.0) <= 0.25 * 35.0


def test_noise_off_identity():
    start = 100.0
    tr = synthesize_trace([("ACGT" * 40, FIVE_TO_THREE, start)], acq=QUIET)
    prof = ideal_blockade_profile("ACGT" * 40)
    np.testing.assert_array_equal(tr.samples, prof(tr.times_us - start))


def test_duration_additivity():
    tr = synthesize_trace([("A" * 120, FIVE_TO_THREE, 50.0)], acq=QUIET)
    blocked = np.count_nonzero(tr.samples < 120.0) * tr.sample_interval_us
    assert abs(blocked - 396.0) <= tr.sample_interval_us
    a = tr.annotations[0]
    assert a.duration_us == pytest.approx(396.0)
    assert a.length == 120 and a.direction == "five_to_three"


def test_defaults_give_a120_plateau():
    tr = synthesize_trace([("A" * 120, FIVE_TO_THREE, 1000.0)], acq=AcquisitionParams(rng_seed=3))
    t = tr.times_us
    core = tr.samples[(t > 1050) & (t < 1346)]
    sigma = np.std(tr.samples[t < 900])
    assert 2.0 < sigma < 6.0
    assert abs(core.mean() - 20.0) < 4 * sigma / math.sqrt(core.size) + 0.5


def test_seeded_determinism():
    ev = [("C" * 60, None, 500.0)]
    a = synthesize_trace(ev, acq=AcquisitionParams(rng_seed=11))
    b = synthesize_trace(ev, acq=AcquisitionParams(rng_seed=11))
    c = synthesize_trace(ev, acq=AcquisitionParams(rng_seed=12))
    np.testing.assert_array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def _open_sigma(area, seed=5):
    acq = AcquisitionParams(bilayer_area_um2=area, rng_seed=seed)
    tr = synthesize_trace([], acq=acq, duration_us=1e5)
    assert len(tr) > 1e4
    return float(np.std(tr.samples))


def test_halving_area_halves_noise():
    ratio = _open_sigma(600.0) / _open_sigma(1200.0)
    assert ratio == pytest.approx(0.5, rel=0.03)


def test_noise_coefficient_calibration():
    acq = AcquisitionParams()
    assert _open_sigma(acq.bilayer_area_um2) == pytest.approx(4.0, rel=0.05)
    assert noise_coefficient_for_rms(4.0, acq) == pytest.approx(acq.noise_coefficient, rel=0.02)


def test_overlap_raises():
    with pytest.raises(SchedulingError):
        synthesize_trace([("A" * 10, FIVE_TO_THREE, 0.0), ("A" * 10, FIVE_TO_THREE, 20.0)], acq=QUIET)


def test_schedule_back_to_back():
    specs = schedule_back_to_back(["A" * 120, "C" * 120], gap_us=100.0, lead_us=50.0)
    assert specs[0].start_us == 50.0
    # slowest direction of the A strand
    assert specs[1].start_us == pytest.approx(50.0 + 648.0 + 100.0)
    synthesize_trace(specs, acq=QUIET)


def test_unknown_bandwidth_rejected():
    with pytest.raises(ConfigError):
        AcquisitionParams(filter_bandwidth_khz=50.0)
    AcquisitionParams(filter_bandwidth_khz=50.0, allow_any_bandwidth=True)


def test_csv_round_trip(tmp_path):
    tr = synthesize_trace([EventSpec("A" * 30, FIVE_TO_THREE, 100.0)], acq=AcquisitionParams(rng_seed=1))
    tr.to_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().startswith("time_s,current_pA\n")
    back = CurrentTrace.from_csv(tmp_path / "t.csv")
    assert back.sample_interval_us == pytest.approx(5.0)
    np.testing.assert_array_equal(back.samples, tr.samples)


def test_pore_from_kv():
    pore, used = pore_from_kv({"residual_G": "30", "dwell_T": "2.0, 2.5", "open_current_pA": "130"})
    assert pore.residual_pA["G"] == 30.0
    assert pore.dwell_us["T"] == (2.0, 2.5)
    assert pore.open_current_pA == 130.0
    assert used == {"residual_G", "dwell_T", "open_current_pA"}


# --- filter -------------------------------------------------------------------


def _bessel4_step_oracle(fc_hz, t):
    """Step response of the analog 4-pole Bessel with -3 dB at fc, by partial fractions."""
    den = np.array([1.0, 10.0, 45.0, 105.0, 105.0])

    def mag2(w):
        return abs(105.0 / np.polyval(den, 1j * w)) ** 2

    lo, hi = 0.1, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if mag2(mid) > 0.5 else (lo, mid)
    w3 = 0.5 * (lo + hi)
    scale = 2 * np.pi * fc_hz / w3
    poles = np.roots(den)
    dden = np.polyder(den)
    y = np.ones_like(t, dtype=complex)
    for p in poles:
        y += 105.0 / (p * np.polyval(dden, p)) * np.exp(p * scale * t)
    return y.real


def test_dc_gain():
    tr = CurrentTrace(np.full(5000, 120.0), 1.0)
    for bw in (5.0, 20.0, 100.0):
        np.testing.assert_allclose(bessel_lowpass(tr, bw).samples, 120.0, rtol=1e-9)


def test_step_response_matches_analog_bessel():
    dt_us, fc = 1.0, 5e3
    n0, n = 50, 3000
    x = np.zeros(n)
    x[n0:] = 1.0
    y = bessel_lowpass(CurrentTrace(x, dt_us), fc / 1e3).samples
    t = (np.arange(n - n0) + 0.5) * dt_us * 1e-6  # trapezoid rule sees the step half a sample early
    ref = _bessel4_step_oracle(fc, t)
    assert np.max(np.abs(y[n0:] - ref)) < 2e-3
    overshoot = y.max() - 1.0
    assert 0 < overshoot < 0.01
    assert abs(y[-1] - 1.0) < 1e-6


def test_white_noise_variance_ratio(rng):
    noise = CurrentTrace(rng.normal(0, 1, 200_000), 1.0)
    v100 = np.var(bessel_lowpass(noise, 100.0).samples)
    v5 = np.var(bessel_lowpass(noise, 5.0).samples)
    assert v100 > 10 * v5


def test_filter_rejects_nyquist():
    tr = CurrentTrace(np.ones(100), 5.0)
    with pytest.raises(ConfigError):
        bessel_lowpass(tr, 100.0)
    with pytest.raises(ConfigError):
        bessel_lowpass(tr, 150.0)
