import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.signal import sawtooth

from herdsig import features as F, synth
from herdsig.audio_io import AudioClip, FrameConfig
from herdsig.errors import (ClipTooShort, FormantsUnresolved, NoVoicedFrames, SchemaMismatch,
                            ZeroEnergyFrame)
from herdsig.labels import CallLabel
from herdsig.segmentation import VocalEvent

from conftest import SR, tone

BIN = SR / 1024


def event(x, sr=SR):
    return VocalEvent.whole(AudioClip(np.asarray(x, dtype=np.float64), sr, "e"))


@pytest.fixture(scope="module")
def noise_event():
    return event(0.3 * np.random.default_rng(5).standard_normal(SR // 2))


# -- F0 ------------------------------------------------------------------

def test_f0_of_sawtooth():
    t = np.arange(SR) / SR
    c = F.extract_f0(event(0.5 * sawtooth(2 * np.pi * 120 * t)))
    assert np.mean(c.f0_hz) == pytest.approx(120, abs=1.2)
    assert c.voicing_fraction > 0.95
    assert np.all(np.diff(c.times_s) > 0)


def test_f0_of_sine():
    c = F.extract_f0(event(tone(200.0, 1.0)))
    assert np.mean(c.f0_hz) == pytest.approx(200, abs=1.0)


def test_f0_of_noise_is_unvoiced(noise_event):
    with pytest.raises(NoVoicedFrames):
        F.extract_f0(noise_event)


@pytest.mark.parametrize("f0", [75.0, 150.0, 310.0, 480.0])
def test_f0_within_band_on_synth(f0):
    spec = synth.SynthSpec(CallLabel.HFC, 1.0, f0, f0)
    c = F.extract_f0(VocalEvent.whole(synth.render(spec)))
    assert np.all((c.f0_hz >= 50) & (c.f0_hz <= 600))
    assert np.mean(c.f0_hz) == pytest.approx(f0, rel=0.02)


def test_f0_statistics_flat():
    c = F.F0Contour(np.arange(5) * 0.01, np.full(5, 150.0), 1.0)
    assert F.f0_statistics(c) == (150.0, 150.0, 150.0, 0.0, 0.0)


def test_fm_extent_triangle():
    up = np.linspace(100, 160, 7)
    track = np.r_[up, up[::-1][1:], up[1:], up[::-1][1:]]
    assert F.fm_extent(track) == pytest.approx(60.0)


def test_fm_extent_monotone_is_zero():
    assert F.fm_extent(np.linspace(100, 200, 30)) == 0.0


@given(st.lists(st.floats(50, 600), min_size=1, max_size=60))
def test_f0_statistics_invariants(values):
    lo, mean, hi, rng_, fm = F.f0_statistics(F.F0Contour(np.arange(len(values)),
                                                         np.array(values), 1.0))
    assert lo <= mean + 1e-9 and mean <= hi + 1e-9
    assert rng_ == hi - lo
    assert fm >= 0


def test_pitch_range_ordering():
    lfc = F.F0Contour(np.arange(50), 100 + 33.0 * np.sin(np.linspace(0, 3, 50)) ** 2, 1.0)
    hfc = F.F0Contour(np.arange(50), 150 + 514.0 * np.sin(np.linspace(0, 3, 50)) ** 2, 1.0)
    assert F.f0_statistics(lfc)[3] < F.f0_statistics(hfc)[3]


# -- spectral ------------------------------------------------------------

def test_spectral_features_of_sine():
    c, band, q25, q50, q75, fpeak = F.spectral_features(event(tone(1000.0)))
    assert c == pytest.approx(1000, abs=BIN)
    assert fpeak == pytest.approx(1000, abs=BIN / 2)
    # the windowed main lobe spans neighbouring bins
    for q in (q25, q50, q75):
        assert abs(q - 1000) <= BIN


def test_spectral_quartiles_of_white_noise():
    x = np.random.default_rng(1).standard_normal(10 * SR)
    _, _, _, q50, _, _ = F.spectral_features(event(x))
    assert q50 == pytest.approx(SR / 4, rel=0.05)


def test_spectral_two_lines():
    x = tone(500.0) + tone(1500.0)
    c, band, q25, q50, q75, _ = F.spectral_features(event(x))
    assert c == pytest.approx(1000, abs=BIN)
    assert abs(q25 - 500) <= BIN
    assert abs(q75 - 1500) <= BIN
    assert band >= 1000 - BIN


def test_spectral_zero_energy():
    with pytest.raises(ZeroEnergyFrame):
        F.spectral_features(event(np.zeros(2000)))


@given(st.integers(0, 10_000))
def test_quartile_ordering(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(400, 4000))
    x = r.standard_normal(n) * r.uniform(0, 1, n) ** r.integers(1, 4)
    x += r.uniform(0, 1) * np.sin(2 * np.pi * r.uniform(50, 7000) * np.arange(n) / SR)
    _, _, q25, q50, q75, _ = F.spectral_features(event(x))
    assert q25 <= q50 <= q75


# -- amplitude -----------------------------------------------------------

@pytest.mark.parametrize("freq,amp", [(437.0, 0.5), (1000.0, 0.8), (123.4, 0.3)])
def test_sine_rms_and_zcr(freq, amp):
    db, rms, zcr, _, _, _ = F.amplitude_features(event(tone(freq, 1.0, amp)))
    assert rms == pytest.approx(amp / np.sqrt(2), abs=1e-3)
    assert abs(zcr - 2 * freq / SR) <= 1.0 / 400
    assert db <= 0


def test_am_rate_of_modulated_tone():
    t = np.arange(SR) / SR
    x = tone(500.0, 1.0, 0.8) * 0.5 * (1 - np.cos(2 * np.pi * 8 * t))
    _, _, _, extent, rate, var = F.amplitude_features(event(x))
    assert rate == pytest.approx(8, abs=1)
    assert extent > 0 and var > 0


def test_flat_signal_has_no_modulation():
    _, _, _, extent, rate, _ = F.amplitude_features(event(tone(500.0, 1.0, 0.5)))
    assert extent == 0 and rate == 0


def test_amplitude_needs_two_frames():
    with pytest.raises(ClipTooShort):
        F.amplitude_features(event(np.ones(450)))


# -- formants ------------------------------------------------------------

def test_formants_of_synthetic_vowel():
    spec = synth.SynthSpec(CallLabel.LFC, 1.0, 120.0, 120.0,
                           formants=((600, 80), (1700, 110), (2800, 150), (3800, 200)))
    out = F.formant_features(VocalEvent.whole(synth.render(spec)))
    assert out["f1_mean"] == pytest.approx(600, rel=0.1)
    assert out["f2_mean"] == pytest.approx(1700, rel=0.1)
    means = [out[f"f{k}_mean"] for k in range(1, 5) if out[f"f{k}_mean"] is not None]
    assert means == sorted(means)


def test_f2_contrast_between_classes():
    h = synth.sample_spec(CallLabel.HFC, 21)
    l = synth.sample_spec(CallLabel.LFC, 22)
    fh = F.formant_features(VocalEvent.whole(synth.render(h)))
    fl = F.formant_features(VocalEvent.whole(synth.render(l)))
    assert fh["f2_mean"] > fl["f2_mean"]


def test_formants_of_noise(noise_event):
    with pytest.raises(FormantsUnresolved):
        F.formant_features(noise_event)


@pytest.mark.parametrize("label,index", [(CallLabel.LFC, 16), (CallLabel.HFC, 3)])
def test_formants_of_quiet_call_above_pcm_floor(label, index):
    # quiet calls stored as 16-bit PCM have a white quantization floor above 4 kHz
    spec = synth.sample_spec(label, synth.item_seed(7, label, index))
    clip = synth.render(spec)
    pcm = AudioClip(np.round(clip.samples * 32767) / 32767, SR, "q")
    out = F.formant_features(VocalEvent.whole(pcm))
    assert out["f1_mean"] == pytest.approx(spec.formants[0][0], rel=0.1)
    assert out["f2_mean"] == pytest.approx(spec.formants[1][0], rel=0.1)


def test_formant_signal_rate():
    x = tone(440.0, 0.5)
    y, sr = F.formant_signal(VocalEvent.whole(AudioClip(x, SR, "t")))
    assert sr == 11000 and len(y) == round(len(x) * 11 / 16)
    y8, sr8 = F.formant_signal(VocalEvent.whole(AudioClip(x[::2], 8000, "t")))
    assert sr8 == 8000 and np.array_equal(y8, x[::2])


def test_lpc_order():
    assert F.lpc_order(16000) == 10
    assert F.lpc_order(11000) == 8
    assert F.lpc_order(96000) == 24


# -- MFCC ----------------------------------------------------------------

def test_repeated_frames_have_zero_deltas():
    period = np.random.default_rng(3).standard_normal(160)
    _, d = F.mfcc_features(event(np.tile(period, 40)))
    assert np.allclose(d, 0.0, atol=1e-9)


def test_gain_lands_in_c0():
    # broadband input keeps every mel band far above the log floor
    x = 0.2 * np.random.default_rng(8).standard_normal(SR // 2)
    e = event(x)
    loud = event(x * 2.0)
    quiet = event(x * 0.25)
    m, _ = F.mfcc_features(e)
    for other in (loud, quiet):
        m2, _ = F.mfcc_features(other)
        assert np.allclose(m2[1:], m[1:], atol=1e-6)
    assert F.mfcc_features(loud)[0][0] > m[0] > F.mfcc_features(quiet)[0][0]


def test_mfcc_deltas_larger_for_hfc():
    h_d, l_d = [], []
    for seed in range(20):
        h = VocalEvent.whole(synth.render(synth.sample_spec(CallLabel.HFC, 300 + seed)))
        l = VocalEvent.whole(synth.render(synth.sample_spec(CallLabel.LFC, 300 + seed)))
        h_d.append(np.mean(F.mfcc_features(h)[1]))
        l_d.append(np.mean(F.mfcc_features(l)[1]))
    assert np.mean(h_d) > np.mean(l_d)
    assert np.sum(np.array(h_d) > np.array(l_d)) >= 18


def test_mfcc_sequence_shape(tone_clip):
    seq = F.mfcc_sequence(VocalEvent.whole(tone_clip))
    assert seq.shape == (48, 13)


# -- HNR -----------------------------------------------------------------

def test_hnr_of_sine():
    e = event(tone(200.0, 1.0))
    assert F.hnr(e, F.extract_f0(e)) > 30


def test_hnr_of_sine_in_equal_power_noise():
    r = np.random.default_rng(9)
    s = tone(200.0, 2.0, 0.5)
    x = s + r.standard_normal(len(s)) * np.std(s)
    e = event(x)
    assert F.hnr(e, F.extract_f0(e)) == pytest.approx(0.0, abs=1.5)


def test_hnr_recomputes_without_strengths():
    e = event(tone(200.0, 1.0))
    c = F.extract_f0(e)
    bare = F.F0Contour(c.times_s, c.f0_hz, c.voicing_fraction, c.frame_index)
    assert F.hnr(e, bare) == pytest.approx(F.hnr(e, c), abs=0.5)


def test_hnr_clamps_perfect_periodicity():
    e = event(tone(200.0, 0.5))
    c = F.F0Contour(np.zeros(3), np.full(3, 200.0), 1.0, np.arange(3), np.ones(3))
    assert F.hnr(e, c) == pytest.approx(60.0, abs=1e-3)


def test_hnr_empty_contour():
    with pytest.raises(NoVoicedFrames):
        F.hnr(event(tone(200.0)), F.F0Contour(np.zeros(0), np.zeros(0), 0.0))


# -- aggregate -----------------------------------------------------------

def test_extract_all_lfc_in_class_ranges(lfc_clip):
    f = F.extract_all(VocalEvent.whole(lfc_clip))
    assert 72.61 <= f.f0_mean <= 183.27
    assert 0.650 <= f.duration_s <= 2.921


def test_extract_all_hfc_in_class_range(hfc_clip):
    f = F.extract_all(VocalEvent.whole(hfc_clip))
    assert 110.59 <= f.f0_mean <= 494.16


def test_extract_all_invariants(hfc_clip, lfc_clip):
    for clip in (hfc_clip, lfc_clip):
        e = VocalEvent.whole(clip)
        f = F.extract_all(e)
        assert f.q25_hz <= f.q50_hz <= f.q75_hz
        assert f.f0_min <= f.f0_mean <= f.f0_max
        assert f.f0_range == f.f0_max - f.f0_min
        assert 0 <= f.rms_mean <= 1 and 0 <= f.zcr_mean <= 1
        assert f.amplitude_db <= 0
        assert f.duration_s == e.end_s - e.start_s
        assert f.fm_extent_hz >= 0 and f.am_extent_db >= 0


def test_extract_all_noise_degrades_to_missing(noise_event):
    f = F.extract_all(noise_event)
    assert f.f0_mean is None and f.f1_mean is None and f.hnr_db is None
    assert f.rms_mean > 0 and f.mfcc_mean is not None


def test_extract_all_silence():
    with pytest.raises(ZeroEnergyFrame):
        F.extract_all(event(np.zeros(SR // 2)))


def test_gain_covariance(hfc_clip):
    g = 0.5
    a = F.extract_all(VocalEvent.whole(hfc_clip))
    b = F.extract_all(VocalEvent.whole(AudioClip(hfc_clip.samples * g, SR)))
    assert b.amplitude_db - a.amplitude_db == pytest.approx(20 * np.log10(g), abs=1e-6)
    assert b.rms_mean == pytest.approx(g * a.rms_mean, rel=1e-9)
    for name in ("f0_mean", "zcr_mean"):
        assert getattr(b, name) == pytest.approx(getattr(a, name), rel=1e-6)
    for name in ("q25_hz", "q50_hz", "q75_hz", "spectral_centroid_hz", "f1_mean", "f2_mean"):
        assert abs(getattr(b, name) - getattr(a, name)) <= BIN


def test_time_shift_invariance(lfc_clip):
    from herdsig.segmentation import segment
    base = F.extract_all(segment(lfc_clip)[0])
    shifted_clip = AudioClip(np.r_[np.zeros(4321), lfc_clip.samples], SR)
    (ev,) = segment(shifted_clip)
    moved = F.extract_all(ev)
    assert abs(moved.duration_s - base.duration_s) <= 0.010 + 1e-9
    assert moved.f0_mean == pytest.approx(base.f0_mean, rel=0.01)
    assert abs(moved.q50_hz - base.q50_hz) <= BIN
    assert moved.f1_mean == pytest.approx(base.f1_mean, rel=0.05)


# -- CSV -----------------------------------------------------------------

def test_csv_header_exact():
    expected = ("source_id,start_s,end_s,duration_s,f0_min,f0_mean,f0_max,f0_range,fm_extent_hz,"
                "bandwidth_hz,amplitude_db,am_extent_db,am_rate_hz,am_var_db_per_s,q25_hz,q50_hz,"
                "q75_hz,f1_mean,f2_mean,f3_mean,f4_mean,f1_range,f2_range,f3_range,f4_range,"
                "fpeak_hz,spectral_centroid_hz,rms_mean,zcr_mean,hnr_db,"
                + ",".join(f"mfcc_{i}" for i in range(13)) + ","
                + ",".join(f"dmfcc_{i}" for i in range(13)) + ",label")
    assert ",".join(F.CSV_HEADER) == expected


def test_csv_round_trip(lfc_clip, noise_event):
    e = VocalEvent.whole(lfc_clip)
    feats = F.extract_all(e)
    rows = [F.feature_row(feats, e, label=CallLabel.LFC),
            F.feature_row(F.extract_all(noise_event), noise_event)]
    text = F.features_to_csv(rows)
    header, recs = F.read_feature_csv(text)
    assert header == F.CSV_HEADER
    assert recs[0]["label"] == "LFC" and recs[1]["label"] == ""
    assert recs[1]["f0_mean"] is None
    assert recs[0]["f0_mean"] == pytest.approx(feats.f0_mean, rel=1e-5)
    assert F.format_value(1234.56789) == "1234.57"
    assert F.format_value(None) == "" and F.format_value(float("nan")) == ""


def test_csv_schema_mismatch():
    bad = ",".join(reversed(F.CSV_HEADER)) + "\n"
    with pytest.raises(SchemaMismatch):
        F.read_feature_csv(bad)


def test_vector_round_trip(lfc_clip):
    f = F.extract_all(VocalEvent.whole(lfc_clip))
    assert F.AcousticFeatures.from_vector(f.vector()) == f


def test_sequence_csv_round_trip(rng):
    seqs = {"a@0": rng.standard_normal((4, 13)), "b@1.5": rng.standard_normal((2, 13))}
    back = F.read_sequence_csv(F.sequences_to_csv(seqs))
    assert set(back) == set(seqs)
    for k in seqs:
        assert np.allclose(back[k], seqs[k], rtol=1e-5)
    with pytest.raises(SchemaMismatch):
        F.read_sequence_csv("key,t\n")


def test_frame_config_changes_resolution(tone_clip):
    e = VocalEvent.whole(tone_clip)
    coarse = F.mfcc_sequence(e, FrameConfig(frame_ms=50, hop_ms=25))
    assert coarse.shape[0] < F.mfcc_sequence(e).shape[0]
