"""Per-event acoustic parameters: pitch, spectral shape, amplitude modulation,
formants, MFCC summaries and harmonicity."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import find_peaks, resample_poly

from . import dsp
from .audio_io import FrameConfig, frame_matrix, frame_starts
from .errors import ClipTooShort, FormantsUnresolved, NoVoicedFrames, SchemaMismatch, ZeroEnergyFrame
from .segmentation import DB_FLOOR, VocalEvent

F0_MIN_HZ = 50.0
F0_MAX_HZ = 600.0
VOICING_THRESHOLD = 0.45
OCTAVE_COST = 0.02
OCTAVE_JUMP = 0.60
MEDIAN_SPAN = 15

PRE_EMPHASIS = 0.97
FORMANT_MAX_BW_HZ = 400.0
FORMANT_MIN_HZ = 90.0
DAP_MIN_F0 = 200.0
N_FORMANTS = 4
# formant analysis runs at twice this rate ceiling, keeping poles off the noise floor above it
FORMANT_CEILING_HZ = 5500.0

N_MFCC = 13
N_MEL = 26
LOG_FLOOR = 1e-10
AM_PROMINENCE_DB = 1.5
AM_SMOOTH_MS = 30.0


@dataclass(frozen=True)
class F0Contour:
    times_s: np.ndarray
    f0_hz: np.ndarray
    voicing_fraction: float
    frame_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    strength: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return len(self.f0_hz)


def _grid(event: VocalEvent, cfg: FrameConfig):
    sr = event.sample_rate
    L = cfg.frame_length(sr)
    H = cfg.hop_length(sr)
    return sr, L, H


def _require_frames(event: VocalEvent, cfg: FrameConfig, count: int) -> np.ndarray:
    sr, L, H = _grid(event, cfg)
    n = len(event.samples)
    if n < L:
        raise ClipTooShort(f"event of {n} samples is shorter than one frame")
    starts = frame_starts(n, L, H)
    if len(starts) < count:
        raise ClipTooShort(f"event has {len(starts)} frames, needs {count}")
    return starts


# --------------------------------------------------------------------------
# F0

def _pitch_window(sr: int, L: int, f0_min: float) -> int:
    return max(L, int(math.ceil(3.0 * sr / f0_min)))


def _pitch_frames(x: np.ndarray, starts: np.ndarray, L: int, W: int) -> np.ndarray:
    """Length-W frames centred on the centres of the standard analysis frames."""
    pad = W // 2 + 1
    xp = np.pad(np.asarray(x, dtype=np.float64), (pad, pad))
    first = starts + L // 2 - W // 2 + pad
    idx = first[:, None] + np.arange(W)[None, :]
    return xp[idx]


def _pick_lags(r: np.ndarray, lag_min: int, lag_max: int, exclude=None):
    """Best autocorrelation peak per row, with a small preference for short lags.

    Returns refined lag (fractional), interpolated peak height, and found mask.
    ``exclude`` optionally gives per-row (lo, hi) lag intervals to skip.
    """
    n = r.shape[0]
    seg = r[:, lag_min - 1: lag_max + 2]
    mid = seg[:, 1:-1]
    left = seg[:, :-2]
    right = seg[:, 2:]
    is_peak = (mid > left) & (mid >= right) & np.isfinite(mid)
    lags = np.arange(lag_min, lag_max + 1)
    if exclude is not None:
        lo, hi = exclude
        is_peak &= ~((lags[None, :] >= lo[:, None]) & (lags[None, :] <= hi[:, None]))
    denom = left - 2.0 * mid + right
    with np.errstate(invalid="ignore", divide="ignore"):
        delta = np.where(denom < 0, 0.5 * (left - right) / denom, 0.0)
    delta = np.clip(np.nan_to_num(delta), -0.5, 0.5)
    # window correction can push long-lag values past 1 when energy is uneven
    # across the window; cap so the octave cost decides between such peaks
    height = np.minimum(mid - 0.25 * (left - right) * delta, 1.0)
    score = height - OCTAVE_COST * np.log2(lags / lag_min)[None, :]
    score = np.where(is_peak, score, -np.inf)
    best = np.argmax(score, axis=1)
    rows = np.arange(n)
    found = np.isfinite(score[rows, best])
    lag = lags[best] + delta[rows, best]
    return lag, height[rows, best], found


def extract_f0(event: VocalEvent, frame_cfg: FrameConfig = FrameConfig(),
               f0_min: float = F0_MIN_HZ, f0_max: float = F0_MAX_HZ,
               voicing_threshold: float = VOICING_THRESHOLD) -> F0Contour:
    """Autocorrelation pitch track on the standard frame grid.

    Each frame is analysed with a Hann window spanning three periods of
    ``f0_min`` (or the frame length, if longer) and the window-corrected
    autocorrelation. A frame is voiced when its best peak reaches
    ``voicing_threshold``. Frames more than 60% away from the running median
    are searched again with the offending lag region excluded.
    """
    sr, L, H = _grid(event, frame_cfg)
    starts = _require_frames(event, frame_cfg, 3)
    W = _pitch_window(sr, L, f0_min)
    window = np.hanning(W + 2)[1:-1]
    r = dsp.windowed_autocorrelation(_pitch_frames(event.samples, starts, L, W), window)
    lag_min = max(2, int(math.floor(sr / f0_max)))
    lag_max = min(int(math.ceil(sr / f0_min)), r.shape[1] - 2)

    lag, height, found = _pick_lags(r, lag_min, lag_max)
    voiced = found & (height >= voicing_threshold)
    f0 = np.where(voiced, sr / np.where(voiced, lag, 1.0), np.nan)

    if np.count_nonzero(voiced) >= 3:
        med = _running_median(f0, MEDIAN_SPAN)
        jump = voiced & (np.abs(f0 - med) > OCTAVE_JUMP * med)
        if np.any(jump):
            rows = np.flatnonzero(jump)
            lo = np.floor(lag[rows] * 0.85)
            hi = np.ceil(lag[rows] * 1.15)
            lag2, h2, found2 = _pick_lags(r[rows], lag_min, lag_max, exclude=(lo, hi))
            ok2 = found2 & (h2 >= voicing_threshold)
            voiced[rows] = ok2
            lag[rows] = np.where(ok2, lag2, lag[rows])
            height[rows] = np.where(ok2, h2, height[rows])
            f0 = np.where(voiced, sr / np.where(voiced, lag, 1.0), np.nan)

    idx = np.flatnonzero(voiced)
    if idx.size == 0:
        raise NoVoicedFrames("no frame reached the voicing threshold")
    times = (starts[idx] + L / 2.0) / sr
    return F0Contour(times, f0[idx], idx.size / len(starts), idx, height[idx])


def _running_median(values: np.ndarray, span: int) -> np.ndarray:
    """Median of the finite values within +-span//2 positions."""
    half = span // 2
    padded = np.pad(np.asarray(values, dtype=np.float64), half, constant_values=np.nan)
    win = np.lib.stride_tricks.sliding_window_view(padded, 2 * half + 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.nanmedian(win, axis=1)


def f0_statistics(contour: F0Contour):
    """``(min, mean, max, range, fm_extent)`` of a pitch track.

    FM extent is the mean absolute difference over consecutive pairs of
    interior local extrema of the track; 0 when there are none.
    """
    f = np.asarray(contour.f0_hz, dtype=np.float64)
    if f.size == 0:
        raise ValueError("empty contour")
    lo, hi = float(np.min(f)), float(np.max(f))
    return lo, float(np.mean(f)), hi, hi - lo, fm_extent(f)


def _interior_extrema(track: np.ndarray) -> np.ndarray:
    t = np.asarray(track, dtype=np.float64)
    keep = np.concatenate(([True], np.diff(t) != 0))
    t = t[keep]
    if t.size < 3:
        return np.zeros(0)
    d = np.sign(np.diff(t))
    turns = np.flatnonzero(d[1:] != d[:-1]) + 1
    return t[turns]


def fm_extent(track) -> float:
    ext = _interior_extrema(track)
    if ext.size < 2:
        return 0.0
    return float(np.mean(np.abs(np.diff(ext))))


# --------------------------------------------------------------------------
# spectral shape

def mean_power_spectrum(event: VocalEvent, frame_cfg: FrameConfig = FrameConfig()):
    sr, L, H = _grid(event, frame_cfg)
    _require_frames(event, frame_cfg, 1)
    fr = frame_matrix(event.samples, L, H) * frame_cfg.window_array(L)[None, :]
    n_fft = dsp.analysis_fft_size(L)
    return dsp.power_spectra(fr, n_fft).mean(axis=0), sr / n_fft


def _quantile_bin(cum: np.ndarray, q: float) -> int:
    return int(np.searchsorted(cum, q * cum[-1], side="left"))


def spectral_features(event: VocalEvent, frame_cfg: FrameConfig = FrameConfig()):
    """``(centroid, bandwidth, q25, q50, q75, fpeak)`` in Hz from the mean power
    spectrum. Bandwidth spans the bins holding the central 99% of power."""
    P, bin_hz = mean_power_spectrum(event, frame_cfg)
    total = float(np.sum(P))
    if not total > 0.0:
        raise ZeroEnergyFrame("event has no spectral energy")
    freqs = np.arange(len(P)) * bin_hz
    centroid = float(np.sum(freqs * P) / total)
    cum = np.cumsum(P)
    q25, q50, q75 = (_quantile_bin(cum, q) * bin_hz for q in (0.25, 0.50, 0.75))
    band = (_quantile_bin(cum, 0.995) - _quantile_bin(cum, 0.005)) * bin_hz
    k = int(np.argmax(P))
    if 0 < k < len(P) - 1:
        db = 10.0 * np.log10(P[k - 1:k + 2] + 1e-300)
        delta, _ = dsp.parabolic_peak(*db)
    else:
        delta = 0.0
    return centroid, float(band), q25, q50, q75, float((k + delta) * bin_hz)


# --------------------------------------------------------------------------
# amplitude

def amplitude_features(event: VocalEvent, frame_cfg: FrameConfig = FrameConfig()):
    """``(amplitude_db, rms_mean, zcr_mean, am_extent_db, am_rate_hz, am_var_db_per_s)``."""
    sr, L, H = _grid(event, frame_cfg)
    _require_frames(event, frame_cfg, 2)
    fr = frame_matrix(event.samples, L, H)
    rms = np.sqrt(np.mean(fr * fr, axis=1))
    env = 20.0 * np.log10(rms + DB_FLOOR)
    pos = fr >= 0.0
    zcr = np.count_nonzero(pos[:, 1:] != pos[:, :-1], axis=1) / L
    dur = event.duration_s
    peaks, props = find_peaks(smooth_envelope(env, 1000.0 * H / sr),
                              prominence=AM_PROMINENCE_DB)
    am_extent = float(np.mean(props["prominences"])) if peaks.size else 0.0
    am_var = float(np.sum(np.abs(np.diff(env)))) / dur
    return (float(np.mean(env)), float(np.mean(rms)), float(np.mean(zcr)),
            am_extent, peaks.size / dur, am_var)


def smooth_envelope(env: np.ndarray, hop_ms: float) -> np.ndarray:
    """Moving average over ~30 ms; suppresses pitch-rate ripple of low-F0 calls."""
    k = max(1, int(round(AM_SMOOTH_MS / hop_ms)))
    if k == 1 or len(env) < k:
        return env
    padded = np.pad(env, (k // 2, k - 1 - k // 2), mode="edge")
    return np.convolve(padded, np.ones(k) / k, mode="valid")


# --------------------------------------------------------------------------
# formants

def lpc_order(sample_rate: int) -> int:
    return min(24, 2 + int(round(sample_rate / 2000.0)))


def formant_signal(event: VocalEvent, ceiling_hz: float = FORMANT_CEILING_HZ):
    """``(samples, rate)`` for formant analysis, downsampled to ``2 * ceiling_hz`` when higher."""
    x = np.asarray(event.samples, dtype=np.float64)
    sr = event.sample_rate
    target = int(round(2.0 * ceiling_hz))
    if sr <= target:
        return x, sr
    g = math.gcd(target, sr)
    return resample_poly(x, target // g, sr // g), target


def frame_formants(frames: np.ndarray, sample_rate: int, order: int | None = None,
                   f0_hz: np.ndarray | None = None):
    """Candidate formant frequencies per frame (list of ascending arrays).

    Frames whose f0 is at least DAP_MIN_F0 are fitted with a discrete all-pole
    model on their harmonic peaks; autocorrelation LPC there locks onto harmonics.
    """
    order = lpc_order(sample_rate) if order is None else order
    n = len(frames)
    a = np.zeros((n, order))
    ok = np.zeros(n, dtype=bool)
    high = np.zeros(n, dtype=bool)
    if f0_hz is not None:
        high = np.asarray(f0_hz) >= DAP_MIN_F0
    if np.any(high):
        w, pw, mask = dsp.harmonic_peaks(frames[high], np.asarray(f0_hz)[high], sample_rate)
        enough = mask.sum(axis=1) > order // 2
        rows = np.flatnonzero(high)[enough]
        if rows.size:
            a[rows] = dsp.discrete_all_pole(w[enough], pw[enough], mask[enough], order)
            ok[rows] = np.all(np.isfinite(a[rows]), axis=1)
        high[np.flatnonzero(high)[~enough]] = False
    if np.any(~high):
        a[~high], ok[~high] = dsp.lpc_batch(frames[~high], order)
    if not np.any(ok):
        return [np.zeros(0) for _ in range(n)]
    poles = np.zeros((n, order), dtype=complex)
    poles[ok] = dsp.batch_prediction_poles(a[ok])
    with np.errstate(divide="ignore"):
        bw = -(sample_rate / np.pi) * np.log(np.abs(poles))
    freq = np.angle(poles) * sample_rate / (2.0 * np.pi)
    keep = (ok[:, None] & (poles.imag > 0) & (bw < FORMANT_MAX_BW_HZ)
            & (freq >= FORMANT_MIN_HZ) & (freq <= sample_rate / 2.0 - 50.0))
    ranked = np.sort(np.where(keep, freq, np.inf), axis=1)
    counts = keep.sum(axis=1)
    return [ranked[i, :counts[i]] for i in range(n)]


def formant_features(event: VocalEvent, frame_cfg: FrameConfig = FrameConfig(),
                     contour: F0Contour | None = None) -> dict:
    """Mean and range (max - min) of F1..F4 across voiced frames.

    Keys ``f1_mean .. f4_mean, f1_range .. f4_range``; a formant found in fewer
    than half of the voiced frames is reported as None. Raises
    FormantsUnresolved when F1 and F2 are not both resolved.
    """
    if contour is None:
        try:
            contour = extract_f0(event, frame_cfg)
        except NoVoicedFrames:
            raise FormantsUnresolved("no voiced frames") from None
    if len(contour) == 0:
        raise FormantsUnresolved("no voiced frames")
    x, sr = formant_signal(event)
    L, H = frame_cfg.frame_length(sr), frame_cfg.hop_length(sr)
    y = np.concatenate(([x[0]], x[1:] - PRE_EMPHASIS * x[:-1]))
    fm = frame_matrix(y, L, H)
    # resampling can drop the last partial frame
    fr = fm[np.minimum(contour.frame_index, len(fm) - 1)] * frame_cfg.window_array(L)[None, :]
    cands = frame_formants(fr, sr, f0_hz=contour.f0_hz)
    out = {}
    n_voiced = len(cands)
    resolved = 0
    for k in range(N_FORMANTS):
        vals = np.array([c[k] for c in cands if len(c) > k])
        if vals.size and vals.size * 2 >= n_voiced:
            out[f"f{k + 1}_mean"] = float(np.mean(vals))
            out[f"f{k + 1}_range"] = float(np.max(vals) - np.min(vals))
            resolved += 1
        else:
            out[f"f{k + 1}_mean"] = None
            out[f"f{k + 1}_range"] = None
    if out["f1_mean"] is None or out["f2_mean"] is None:
        raise FormantsUnresolved(f"only {resolved} stable formants")
    return out


# --------------------------------------------------------------------------
# cepstral

def mfcc_sequence(event: VocalEvent, frame_cfg: FrameConfig = FrameConfig(),
                  n_mfcc: int = N_MFCC, n_filters: int = N_MEL) -> np.ndarray:
    """Per-frame MFCCs, shape ``(n_frames, n_mfcc)``."""
    sr, L, H = _grid(event, frame_cfg)
    _require_frames(event, frame_cfg, 1)
    fr = frame_matrix(event.samples, L, H) * frame_cfg.window_array(L)[None, :]
    n_fft = dsp.analysis_fft_size(L)
    P = dsp.power_spectra(fr, n_fft)
    if not np.any(P > 0):
        raise ZeroEnergyFrame("event has no spectral energy")
    fb = dsp.mel_filterbank(n_filters, n_fft, sr, 0.0, sr / 2.0)
    logmel = np.log(P @ fb.T + LOG_FLOOR)
    return dsp.dct_ii(logmel, n_mfcc)


def mfcc_features(event: VocalEvent, frame_cfg: FrameConfig = FrameConfig()):
    """Frame-mean MFCCs and frame-mean absolute first difference."""
    _require_frames(event, frame_cfg, 3)
    c = mfcc_sequence(event, frame_cfg)
    return c.mean(axis=0), np.abs(np.diff(c, axis=0)).mean(axis=0)


# --------------------------------------------------------------------------
# harmonicity

HNR_CLAMP = 1e-6


def hnr(event: VocalEvent, contour: F0Contour,
        frame_cfg: FrameConfig = FrameConfig()) -> float:
    """Mean harmonics-to-noise ratio (dB) over the voiced frames of ``contour``.

    Uses the autocorrelation peak heights stored on the contour when present.
    """
    if len(contour) == 0:
        raise NoVoicedFrames("empty contour")
    if len(contour.strength) == len(contour):
        vals = np.asarray(contour.strength, dtype=np.float64)
    else:
        sr, L, H = _grid(event, frame_cfg)
        starts = _require_frames(event, frame_cfg, 1)
        W = _pitch_window(sr, L, F0_MIN_HZ)
        window = np.hanning(W + 2)[1:-1]
        fr = _pitch_frames(event.samples, starts[contour.frame_index], L, W)
        r = dsp.windowed_autocorrelation(fr, window)
        lag = sr / np.asarray(contour.f0_hz)
        vals = np.empty(len(lag))
        for i, t in enumerate(lag):
            k = min(max(int(round(t)), 1), r.shape[1] - 2)
            _, vals[i] = dsp.parabolic_peak(r[i, k - 1], r[i, k], r[i, k + 1])
    vals = np.clip(np.nan_to_num(vals, nan=HNR_CLAMP), HNR_CLAMP, 1.0 - HNR_CLAMP)
    return float(np.mean(10.0 * np.log10(vals / (1.0 - vals))))


# --------------------------------------------------------------------------
# aggregate

SCALAR_FIELDS = (
    "duration_s", "f0_min", "f0_mean", "f0_max", "f0_range", "fm_extent_hz",
    "bandwidth_hz", "amplitude_db", "am_extent_db", "am_rate_hz", "am_var_db_per_s",
    "q25_hz", "q50_hz", "q75_hz",
    "f1_mean", "f2_mean", "f3_mean", "f4_mean", "f1_range", "f2_range", "f3_range", "f4_range",
    "fpeak_hz", "spectral_centroid_hz", "rms_mean", "zcr_mean", "hnr_db",
)
MFCC_COLUMNS = tuple(f"mfcc_{i}" for i in range(N_MFCC))
DMFCC_COLUMNS = tuple(f"dmfcc_{i}" for i in range(N_MFCC))
FEATURE_COLUMNS = SCALAR_FIELDS + MFCC_COLUMNS + DMFCC_COLUMNS
CSV_HEADER = ("source_id", "start_s", "end_s") + FEATURE_COLUMNS + ("label",)


@dataclass(frozen=True)
class AcousticFeatures:
    duration_s: float
    f0_min: Optional[float] = None
    f0_mean: Optional[float] = None
    f0_max: Optional[float] = None
    f0_range: Optional[float] = None
    fm_extent_hz: Optional[float] = None
    bandwidth_hz: Optional[float] = None
    amplitude_db: Optional[float] = None
    am_extent_db: Optional[float] = None
    am_rate_hz: Optional[float] = None
    am_var_db_per_s: Optional[float] = None
    q25_hz: Optional[float] = None
    q50_hz: Optional[float] = None
    q75_hz: Optional[float] = None
    f1_mean: Optional[float] = None
    f2_mean: Optional[float] = None
    f3_mean: Optional[float] = None
    f4_mean: Optional[float] = None
    f1_range: Optional[float] = None
    f2_range: Optional[float] = None
    f3_range: Optional[float] = None
    f4_range: Optional[float] = None
    fpeak_hz: Optional[float] = None
    spectral_centroid_hz: Optional[float] = None
    rms_mean: Optional[float] = None
    zcr_mean: Optional[float] = None
    hnr_db: Optional[float] = None
    mfcc_mean: Optional[tuple] = None
    mfcc_delta_mean: Optional[tuple] = None

    def vector(self) -> dict:
        """Flat ``{column: value-or-None}`` in FEATURE_COLUMNS order."""
        out = {name: getattr(self, name) for name in SCALAR_FIELDS}
        mm = self.mfcc_mean if self.mfcc_mean is not None else (None,) * N_MFCC
        dm = self.mfcc_delta_mean if self.mfcc_delta_mean is not None else (None,) * N_MFCC
        out.update(zip(MFCC_COLUMNS, mm))
        out.update(zip(DMFCC_COLUMNS, dm))
        return out

    @classmethod
    def from_vector(cls, values: dict) -> "AcousticFeatures":
        kw = {name: values.get(name) for name in SCALAR_FIELDS}
        mm = tuple(values.get(c) for c in MFCC_COLUMNS)
        dm = tuple(values.get(c) for c in DMFCC_COLUMNS)
        kw["mfcc_mean"] = None if all(v is None for v in mm) else mm
        kw["mfcc_delta_mean"] = None if all(v is None for v in dm) else dm
        return cls(**kw)


def extract_all(event: VocalEvent, frame_cfg: FrameConfig = FrameConfig()) -> AcousticFeatures:
    """Every parameter for one event. Voicing and formant failures leave the
    affected fields as None; a silent event raises ZeroEnergyFrame."""
    x = np.asarray(event.samples)
    if not np.any(x != 0.0):
        raise ZeroEnergyFrame("event is digital silence")
    kw = {"duration_s": event.duration_s}
    centroid, band, q25, q50, q75, fpeak = spectral_features(event, frame_cfg)
    kw.update(bandwidth_hz=band, q25_hz=q25, q50_hz=q50, q75_hz=q75, fpeak_hz=fpeak,
              spectral_centroid_hz=centroid)
    amp_db, rms_mean, zcr_mean, am_ext, am_rate, am_var = amplitude_features(event, frame_cfg)
    kw.update(amplitude_db=amp_db, rms_mean=rms_mean, zcr_mean=zcr_mean, am_extent_db=am_ext,
              am_rate_hz=am_rate, am_var_db_per_s=am_var)
    mm, dm = mfcc_features(event, frame_cfg)
    kw.update(mfcc_mean=tuple(float(v) for v in mm), mfcc_delta_mean=tuple(float(v) for v in dm))
    try:
        contour = extract_f0(event, frame_cfg)
    except NoVoicedFrames:
        return AcousticFeatures(**kw)
    lo, mean, hi, rng, fm = f0_statistics(contour)
    kw.update(f0_min=lo, f0_mean=mean, f0_max=hi, f0_range=rng, fm_extent_hz=fm)
    kw["hnr_db"] = hnr(event, contour, frame_cfg)
    try:
        kw.update(formant_features(event, frame_cfg, contour))
    except FormantsUnresolved:
        pass
    return AcousticFeatures(**kw)


# --------------------------------------------------------------------------
# CSV

def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and not math.isfinite(v):
        return ""
    return f"{float(v):.6g}"


def feature_row(features: AcousticFeatures, event: VocalEvent | None = None,
                source_id: str = "", start_s: float = 0.0, end_s: float | None = None,
                label=None) -> list:
    if event is not None:
        source_id, start_s, end_s = event.source_id, event.start_s, event.end_s
    if end_s is None:
        end_s = start_s + features.duration_s
    vec = features.vector()
    lab = "" if label is None else getattr(label, "value", str(label))
    return ([source_id, format_value(start_s), format_value(end_s)]
            + [format_value(vec[c]) for c in FEATURE_COLUMNS] + [lab])


def features_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def read_feature_csv(text: str, require_header: bool = True):
    """Parse a feature CSV into ``(header, records)``; each record is a dict with
    floats (or None for empty cells) plus ``source_id``, ``start_s``, ``end_s``, ``label``."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise ValueError("empty feature CSV") from None
    if require_header and header != CSV_HEADER:
        raise SchemaMismatch("feature CSV header does not match the expected schema")
    records = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        rec = dict(zip(header, row))
        for c in FEATURE_COLUMNS:
            if c in rec:
                rec[c] = float(rec[c]) if rec[c] != "" else None
        rec["start_s"] = float(rec["start_s"])
        rec["end_s"] = float(rec["end_s"])
        records.append(rec)
    return header, records


# --------------------------------------------------------------------------
# MFCC sequence sidecar

SEQUENCE_HEADER = ("key", "frame") + MFCC_COLUMNS


def sequences_to_csv(sequences) -> str:
    """``sequences`` maps a record key to a ``(n_frames, 13)`` array."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SEQUENCE_HEADER)
    for key, seq in sequences.items():
        for t, row in enumerate(np.atleast_2d(seq)):
            w.writerow([key, t] + [format_value(float(v)) for v in row])
    return buf.getvalue()


def read_sequence_csv(text: str) -> dict:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader, ()))
    if header != SEQUENCE_HEADER:
        raise SchemaMismatch("sequence CSV header does not match the expected schema")
    rows = {}
    for row in reader:
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"sequence row has {len(row)} fields, header has {len(header)}")
        rows.setdefault(row[0], []).append((int(row[1]), [float(v) for v in row[2:]]))
    return {k: np.array([v for _, v in sorted(r)], dtype=np.float64) for k, r in rows.items()}
