"""Source-filter generator for labelled synthetic calls.

A band-limited pulse train with a -6 dB/octave (sawtooth) harmonic slope
follows the instantaneous F0 (linear glide plus sinusoidal FM) and drives four
cascaded two-pole resonators. The result is amplitude-modulated, given 20 ms
raised-cosine edges and peak-normalized. White noise at the requested SNR is
mixed into the excitation by default (breath noise, shaped by the resonators);
``noise_at="output"`` adds it after filtering instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .audio_io import AudioClip, CorpusManifest, ManifestEntry, write_wav
from .errors import IoFailure, NyquistViolation
from .labels import CallLabel

EDGE_S = 0.020
N_COWS = 20


@dataclass(frozen=True)
class ClassRanges:
    f0_hz: tuple
    f0_exclusive_hz: tuple
    loudness_db: tuple
    duration_s: tuple
    formants_hz: tuple


# Frequency, loudness and duration ranges of the two call classes; formant
# presets for F1..F3 are the class means, F4 is shared.
CLASS_RANGES = {
    CallLabel.HFC: ClassRanges(
        f0_hz=(110.59, 494.16),
        f0_exclusive_hz=(183.27, 494.16),
        loudness_db=(-39.71, -2.45),
        duration_s=(0.638, 9.581),
        formants_hz=(609.56, 1704.81, 2779.11, 3800.0),
    ),
    CallLabel.LFC: ClassRanges(
        f0_hz=(72.61, 183.27),
        f0_exclusive_hz=(72.61, 110.59),
        loudness_db=(-53.88, -8.16),
        duration_s=(0.650, 2.921),
        formants_hz=(617.35, 1542.96, 2844.92, 3800.0),
    ),
}
FORMANT_BANDWIDTHS_HZ = (80.0, 110.0, 150.0, 200.0)


@dataclass(frozen=True)
class SynthSpec:
    class_label: CallLabel
    duration_s: float
    f0_start_hz: float
    f0_end_hz: float
    fm_depth_hz: float = 0.0
    fm_rate_hz: float = 0.0
    am_depth: float = 0.0
    am_rate_hz: float = 0.0
    formants: tuple = ((600.0, 80.0), (1700.0, 110.0), (2800.0, 150.0), (3800.0, 200.0))
    noise_snr_db: float = 40.0
    peak: float = 0.9
    seed: int = 0
    noise_at: str = "source"

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ValueError("duration must be positive")
        if self.fm_rate_hz < 0 or self.am_rate_hz < 0:
            raise ValueError("modulation rates must be non-negative")
        if not 0.0 <= self.am_depth <= 1.0:
            raise ValueError("am_depth must lie in [0, 1]")
        if not math.isfinite(self.noise_snr_db):
            raise ValueError("SNR must be finite")
        if not 0.0 < self.peak <= 1.0:
            raise ValueError("peak must lie in (0, 1]")
        if self.noise_at not in ("source", "output"):
            raise ValueError("noise_at must be 'source' or 'output'")

    @property
    def peak_db(self) -> float:
        return 20.0 * math.log10(self.peak)

    def f0_track(self, t: np.ndarray) -> np.ndarray:
        glide = self.f0_start_hz + (self.f0_end_hz - self.f0_start_hz) * t / self.duration_s
        return glide + self.fm_depth_hz * np.sin(2.0 * np.pi * self.fm_rate_hz * t)

    @property
    def f0_mean(self) -> float:
        """Time average of the instantaneous F0 over the call."""
        return 0.5 * (self.f0_start_hz + self.f0_end_hz) + _fm_offset(
            self.fm_depth_hz, self.fm_rate_hz, self.duration_s)

    def f0_bounds(self):
        t = np.linspace(0.0, self.duration_s, 4001)
        f = self.f0_track(t)
        return float(f.min()), float(f.max())


def _fm_offset(depth: float, rate: float, duration: float) -> float:
    x = 2.0 * np.pi * rate * duration
    if depth == 0.0 or x == 0.0:
        return 0.0
    return depth * (1.0 - math.cos(x)) / x


def sample_spec(label, rng_seed: int, exclude_overlap: bool = True) -> SynthSpec:
    """Draw a random call of class ``label``, deterministic in ``rng_seed``.

    Duration, mean F0 and peak level are uniform over the class ranges (mean
    F0 restricted to the non-overlapping part of the class band when
    ``exclude_overlap``). Glide and FM are scaled down when needed so that the
    whole F0 track stays inside the class band.
    """
    label = CallLabel.parse(label)
    cr = CLASS_RANGES[label]
    rng = np.random.default_rng(rng_seed)
    duration = float(rng.uniform(*cr.duration_s))
    f_lo, f_hi = cr.f0_exclusive_hz if exclude_overlap else cr.f0_hz
    if label is CallLabel.HFC and exclude_overlap:
        # upper-inclusive interval (183.27, 494.16]
        f0_target = float(f_hi - rng.uniform(0.0, f_hi - f_lo))
        if f0_target <= f_lo:
            f0_target = f_hi
    else:
        f0_target = float(rng.uniform(f_lo, f_hi))
    peak_db = float(rng.uniform(*cr.loudness_db))

    if label is CallLabel.HFC:
        glide = float(rng.uniform(0.10, 0.35)) * f0_target
        fm_depth = float(rng.uniform(0.02, 0.05)) * f0_target
        fm_rate = float(rng.uniform(2.0, 5.0))
        am_depth = float(rng.uniform(0.4, 0.7))
        am_rate = float(rng.uniform(4.0, 10.0))
    else:
        glide = float(rng.uniform(5.0, 20.0))
        fm_depth = float(rng.uniform(1.0, 4.0))
        fm_rate = float(rng.uniform(1.0, 3.0))
        am_depth = float(rng.uniform(0.3, 0.5))
        am_rate = float(rng.uniform(2.0, 5.0))
    direction = 1.0 if rng.uniform() < 0.5 else -1.0
    jitter = rng.uniform(0.9, 1.1, size=4)
    snr = float(rng.uniform(20.0, 40.0))
    noise_seed = int(rng.integers(0, 2**31 - 1))

    band_lo, band_hi = cr.f0_hz
    room = min(f0_target - band_lo, band_hi - f0_target)
    excursion = glide / 2.0 + fm_depth
    if excursion > 0.95 * room:
        scale = 0.95 * room / excursion
        glide *= scale
        fm_depth *= scale
    centre = f0_target - _fm_offset(fm_depth, fm_rate, duration)
    formants = tuple((float(f * j), bw) for f, j, bw in
                     zip(cr.formants_hz, jitter, FORMANT_BANDWIDTHS_HZ))
    return SynthSpec(
        class_label=label,
        duration_s=duration,
        f0_start_hz=centre - direction * glide / 2.0,
        f0_end_hz=centre + direction * glide / 2.0,
        fm_depth_hz=fm_depth,
        fm_rate_hz=fm_rate,
        am_depth=am_depth,
        am_rate_hz=am_rate,
        formants=formants,
        noise_snr_db=snr,
        peak=10.0 ** (peak_db / 20.0),
        seed=noise_seed,
    )


def resonator_coefficients(freq_hz: float, bw_hz: float, sample_rate: int):
    """Unity-DC-gain two-pole resonator ``y = A x + B y[-1] + C y[-2]``."""
    T = 1.0 / sample_rate
    C = -math.exp(-2.0 * math.pi * bw_hz * T)
    B = 2.0 * math.exp(-math.pi * bw_hz * T) * math.cos(2.0 * math.pi * freq_hz * T)
    A = 1.0 - B - C
    return np.array([A]), np.array([1.0, -B, -C])


def pulse_source(f0: np.ndarray, sample_rate: int) -> np.ndarray:
    """Band-limited pulse train with harmonic amplitudes ``1/k`` following an
    instantaneous-frequency track."""
    phase = 2.0 * np.pi * np.cumsum(f0) / sample_rate
    phase -= phase[0]
    k_max = max(1, int(0.45 * sample_rate / float(np.max(f0))))
    z = np.exp(1j * phase)
    zk = np.ones_like(z)
    out = np.zeros_like(phase)
    for k in range(1, k_max + 1):
        zk *= z
        out += zk.real / k
    return out


def edge_ramp(n: int, sample_rate: int, edge_s: float = EDGE_S) -> np.ndarray:
    m = min(int(round(edge_s * sample_rate)), n // 2)
    env = np.ones(n)
    if m > 0:
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(m) / m))
        env[:m] = ramp
        env[n - m:] = ramp[::-1]
    return env


def render(spec: SynthSpec, sample_rate: int = 16000, source_id: str = "") -> AudioClip:
    top = max(f + bw for f, bw in spec.formants)
    if sample_rate < 2.0 * top:
        raise NyquistViolation(f"{sample_rate} Hz cannot represent resonances up to {top:.0f} Hz")
    n = int(round(spec.duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    f0 = spec.f0_track(t)
    if np.max(f0) >= sample_rate / 2.0 or np.min(f0) <= 0:
        raise NyquistViolation("F0 track outside (0, Nyquist)")
    rng = np.random.default_rng(spec.seed)
    y = pulse_source(f0, sample_rate)
    if spec.noise_at == "source":
        y = _add_noise(y, spec.noise_snr_db, rng)
    for freq, bw in spec.formants:
        b, a = resonator_coefficients(freq, bw, sample_rate)
        y = lfilter(b, a, y)
    am = 1.0 - spec.am_depth * 0.5 * (1.0 + np.cos(2.0 * np.pi * spec.am_rate_hz * t))
    y = y * am * edge_ramp(n, sample_rate)
    if spec.noise_at == "output":
        y = _add_noise(y, spec.noise_snr_db, rng)
    peak = float(np.max(np.abs(y)))
    if peak > 0:
        y = y * (spec.peak / peak)
    return AudioClip(y, sample_rate, source_id)


def _add_noise(y: np.ndarray, snr_db: float, rng) -> np.ndarray:
    power = float(np.mean(y * y))
    return y + rng.standard_normal(len(y)) * math.sqrt(power / 10.0 ** (snr_db / 10.0))


def item_seed(seed: int, label: CallLabel, index: int) -> int:
    ss = np.random.SeedSequence([int(seed), label.as_int, int(index)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def corpus_specs(n_per_class: int, seed: int, exclude_overlap: bool = True):
    """``[(file_name, spec, cow_id)]`` for a balanced corpus, HFC files first."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be at least 1")
    items = []
    for label in (CallLabel.HFC, CallLabel.LFC):
        for i in range(n_per_class):
            spec = sample_spec(label, item_seed(seed, label, i), exclude_overlap)
            items.append((f"{label.value.lower()}_{i:04d}.wav", spec))
    return [(name, spec, f"cow{j % N_COWS + 1:02d}") for j, (name, spec) in enumerate(items)]


def make_corpus(n_per_class: int, seed: int, out_dir, sample_rate: int = 16000,
                exclude_overlap: bool = True) -> CorpusManifest:
    """Render ``2 * n_per_class`` labelled WAVs plus ``manifest.csv`` into ``out_dir``."""
    out_dir = Path(out_dir)
    entries = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, spec, cow in corpus_specs(n_per_class, seed, exclude_overlap):
            clip = render(spec, sample_rate, source_id=Path(name).stem)
            write_wav(out_dir / name, clip)
            entries.append(ManifestEntry(name, spec.class_label, cow))
        manifest = CorpusManifest(entries)
        manifest.save(out_dir / "manifest.csv")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return manifest


def with_overrides(spec: SynthSpec, **changes) -> SynthSpec:
    return replace(spec, **changes)
