"""Energy-based call detection and temporal statistics of call sequences."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .audio_io import AudioClip, FrameConfig, frame_matrix, peak_normalize

DB_FLOOR = 1e-10


@dataclass(frozen=True)
class VadConfig:
    threshold_db: float = -35.0
    hang_ms: float = 120.0
    min_event_ms: float = 100.0
    merge_gap_ms: float = 50.0

    def __post_init__(self):
        if self.threshold_db >= 0:
            raise ValueError("threshold_db must be negative (dBFS)")
        if min(self.hang_ms, self.min_event_ms, self.merge_gap_ms) <= 0:
            raise ValueError("VAD durations must be positive")


@dataclass(frozen=True)
class VocalEvent:
    start_s: float
    end_s: float
    samples: np.ndarray
    sample_rate: int
    peak_db: float
    source_id: str = ""

    def __post_init__(self):
        if not self.end_s > self.start_s:
            raise ValueError("event must have end_s > start_s")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def as_clip(self) -> AudioClip:
        return AudioClip(self.samples, self.sample_rate, self.source_id)

    @classmethod
    def whole(cls, clip: AudioClip, frame_cfg: FrameConfig = FrameConfig()) -> "VocalEvent":
        """Treat the entire clip as one event."""
        if len(clip) == 0:
            raise ValueError("empty clip")
        levels = frame_levels_db(clip, frame_cfg) if len(clip) >= frame_cfg.frame_length(
            clip.sample_rate) else np.array([_level_db(clip.samples)])
        return cls(0.0, len(clip) / clip.sample_rate, clip.samples, clip.sample_rate,
                   float(np.max(levels)), clip.source_id)


@dataclass(frozen=True)
class TemporalStats:
    event_count: int
    total_span_s: float
    vocalization_rate: float
    mean_interval_s: Optional[float] = None
    min_interval_s: Optional[float] = None
    max_interval_s: Optional[float] = None


def _level_db(x: np.ndarray) -> float:
    return float(20.0 * np.log10(np.sqrt(np.mean(np.square(x))) + DB_FLOOR))


def frame_levels_db(clip: AudioClip, frame_cfg: FrameConfig = FrameConfig()) -> np.ndarray:
    """Per-frame RMS level in dBFS through the analysis window.

    The window is power-normalized, so a stationary signal reads the same level
    under any window while a tapered window centres each level on its frame.
    """
    L = frame_cfg.frame_length(clip.sample_rate)
    H = frame_cfg.hop_length(clip.sample_rate)
    fr = frame_matrix(clip.samples, L, H)
    w = frame_cfg.window_array(L)
    rms = np.sqrt((fr * fr) @ (w * w) / np.sum(w * w))
    return 20.0 * np.log10(rms + DB_FLOOR)


def _runs(active: np.ndarray, max_gap: int):
    """Index runs of active frames, bridging inactive gaps shorter than ``max_gap``."""
    runs = []
    start = last = None
    for i, on in enumerate(active):
        if on:
            if start is None:
                start = i
            elif i - last - 1 >= max_gap:
                runs.append((start, last))
                start = i
            last = i
    if start is not None:
        runs.append((start, last))
    return runs


def detect_events(clip: AudioClip, frame_cfg: FrameConfig = FrameConfig(),
                  vad: VadConfig = VadConfig()) -> list:
    """Split ``clip`` into vocal events.

    Each frame owns the hop-long cell centred in its window; an event spans the
    cells of its active frames (the first and last frame of the clip extend to
    the clip edges). Active runs separated by fewer than ``hang_ms`` of
    inactive frames are one event.
    Events closer than ``merge_gap_ms`` are then merged, and events shorter
    than ``min_event_ms`` are dropped.
    """
    sr = clip.sample_rate
    L = frame_cfg.frame_length(sr)
    H = frame_cfg.hop_length(sr)
    n = len(clip)
    if n < L:
        return []
    levels = frame_levels_db(clip, frame_cfg)
    active = levels > vad.threshold_db
    hop_ms = 1000.0 * H / sr
    max_gap = max(1, int(np.ceil(vad.hang_ms / hop_ms - 1e-9)))
    last_frame = len(levels) - 1
    lead = (L - H) // 2

    spans = []
    for i0, i1 in _runs(active, max_gap):
        s = 0 if i0 == 0 else i0 * H + lead
        e = n if i1 == last_frame else i1 * H + lead + H
        spans.append([s, min(e, n), i0, i1])

    merged = []
    gap_samples = vad.merge_gap_ms * sr / 1000.0
    for span in spans:
        if merged and span[0] - merged[-1][1] < gap_samples:
            merged[-1][1] = span[1]
            merged[-1][3] = span[3]
        else:
            merged.append(span)

    events = []
    for s, e, i0, i1 in merged:
        if (e - s) * 1000.0 / sr < vad.min_event_ms:
            continue
        events.append(VocalEvent(
            start_s=s / sr,
            end_s=e / sr,
            samples=clip.samples[s:e],
            sample_rate=sr,
            peak_db=float(np.max(levels[i0:i1 + 1])),
            source_id=clip.source_id,
        ))
    return events


def temporal_stats(events: Sequence, span_s: float) -> TemporalStats:
    """Event count, rate per minute and onset-to-onset interval statistics."""
    if not span_s > 0:
        raise ValueError("span_s must be positive")
    onsets = np.array([e.start_s if hasattr(e, "start_s") else float(e) for e in events],
                      dtype=np.float64)
    if np.any(np.diff(onsets) < 0):
        raise ValueError("events must be sorted by onset")
    count = len(onsets)
    rate = count / span_s * 60.0
    if count < 2:
        return TemporalStats(count, span_s, rate)
    gaps = np.diff(onsets)
    return TemporalStats(count, span_s, rate, float(np.mean(gaps)), float(np.min(gaps)),
                         float(np.max(gaps)))


EVENT_CSV_HEADER = ("source_id", "start_s", "end_s", "peak_db")


def events_to_csv(events: Sequence) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_CSV_HEADER)
    for e in events:
        w.writerow([e.source_id, f"{e.start_s:.6g}", f"{e.end_s:.6g}", f"{e.peak_db:.6g}"])
    return buf.getvalue()


def segment(clip: AudioClip, frame_cfg: FrameConfig = FrameConfig(), vad: VadConfig = VadConfig(),
            normalize: bool = True) -> list:
    """Events of ``clip`` for feature analysis.

    With ``normalize`` the activity decision runs on a peak-normalized copy, so
    quiet recordings are segmented like loud ones, while the returned events
    keep the original samples and levels.
    """
    x = np.asarray(clip.samples)
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if not normalize or peak == 0.0:
        return detect_events(clip, frame_cfg, vad)
    gain = 1.0 / peak
    events = detect_events(peak_normalize(clip, 1.0), frame_cfg, vad)
    sr = clip.sample_rate
    return [replace(e, samples=x[int(round(e.start_s * sr)):int(round(e.end_s * sr))],
                    peak_db=e.peak_db - 20.0 * np.log10(gain)) for e in events]
