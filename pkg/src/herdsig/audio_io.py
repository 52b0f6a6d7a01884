"""WAV decoding/encoding, normalization, framing and the corpus manifest.

Only RIFF/WAVE with 16-bit integer PCM or 32-bit IEEE float payloads is
supported. Stereo is downmixed by channel mean.
"""

from __future__ import annotations

import csv
import io
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from scipy import signal

from .errors import ClipTooShort, EmptyAudio, MalformedContainer, UnsupportedEncoding
from .labels import CallLabel

MIN_SAMPLE_RATE = 8000

_FORMAT_PCM = 0x0001
_FORMAT_FLOAT = 0x0003
_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("AudioClip samples must be one-dimensional")
        if not np.all(np.isfinite(x)):
            raise ValueError("AudioClip samples must be finite")
        if int(self.sample_rate) < MIN_SAMPLE_RATE:
            raise ValueError(
                f"sample rate {self.sample_rate} Hz is below the {MIN_SAMPLE_RATE} Hz minimum"
            )
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)

    def with_samples(self, samples) -> "AudioClip":
        return AudioClip(samples, self.sample_rate, self.source_id)


@dataclass(frozen=True)
class FrameConfig:
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    window: str = "hann"

    def __post_init__(self):
        if not (0 < self.hop_ms <= self.frame_ms):
            raise ValueError("FrameConfig requires 0 < hop_ms <= frame_ms")
        if self.window not in ("rectangular", "hann", "hamming"):
            raise ValueError(f"unknown window {self.window!r}")

    def frame_length(self, sample_rate: int) -> int:
        n = int(round(self.frame_ms * sample_rate / 1000.0))
        if n < 2:
            raise ValueError("frame length must be at least 2 samples")
        return n

    def hop_length(self, sample_rate: int) -> int:
        return max(1, int(round(self.hop_ms * sample_rate / 1000.0)))

    def window_array(self, length: int) -> np.ndarray:
        if self.window == "rectangular":
            return np.ones(length)
        return signal.get_window(self.window, length, fftbins=True)


# --------------------------------------------------------------------------
# WAV

def _parse_wav(data: bytes):
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedContainer("missing RIFF/WAVE magic")
    riff_size = struct.unpack("<I", data[4:8])[0]
    if riff_size + 8 > len(data):
        raise MalformedContainer(
            f"RIFF size {riff_size} exceeds file length {len(data) - 8}"
        )
    pos = 12
    end = riff_size + 8
    fmt = None
    payload = None
    while pos + 8 <= end:
        cid = data[pos:pos + 4]
        size = struct.unpack("<I", data[pos + 4:pos + 8])[0]
        body_start = pos + 8
        if body_start + size > end:
            raise MalformedContainer(f"chunk {cid!r} overruns the container")
        body = data[body_start:body_start + size]
        if cid == b"fmt ":
            if size < 16:
                raise MalformedContainer("fmt chunk too short")
            fmt = struct.unpack("<HHIIHH", body[:16])
            if fmt[0] == _FORMAT_EXTENSIBLE:
                if size < 40:
                    raise MalformedContainer("extensible fmt chunk too short")
                sub = struct.unpack("<H", body[24:26])[0]
                fmt = (sub,) + fmt[1:]
        elif cid == b"data":
            payload = body
        pos = body_start + size + (size & 1)
    if fmt is None:
        raise MalformedContainer("no fmt chunk")
    if payload is None:
        raise MalformedContainer("no data chunk")
    return fmt, payload


def decode_wav(data: bytes, source_id: str = "") -> AudioClip:
    fmt, payload = _parse_wav(data)
    tag, channels, rate, _byte_rate, block_align, bits = fmt
    if rate < MIN_SAMPLE_RATE:
        raise UnsupportedEncoding(f"sample rate {rate} Hz below {MIN_SAMPLE_RATE} Hz")
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"{channels} channels (only mono/stereo)")
    if tag == _FORMAT_PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif tag == _FORMAT_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedEncoding(f"format tag {tag:#06x} with {bits} bits")
    if block_align != channels * dtype.itemsize:
        raise MalformedContainer(f"block align {block_align} inconsistent with format")
    if len(payload) % block_align:
        raise MalformedContainer("data chunk is not a whole number of frames")
    raw = np.frombuffer(payload, dtype=dtype).astype(np.float64) * scale
    if raw.size == 0:
        raise EmptyAudio("WAV data chunk holds no samples")
    raw = raw.reshape(-1, channels).mean(axis=1)
    if not np.all(np.isfinite(raw)):
        raise MalformedContainer("non-finite float samples")
    return AudioClip(raw, rate, source_id)


def load_wav(path) -> AudioClip:
    path = Path(path)
    return decode_wav(path.read_bytes(), source_id=path.stem)


def encode_wav(clip: AudioClip, encoding: str = "pcm16") -> bytes:
    x = np.asarray(clip.samples, dtype=np.float64)
    if encoding == "pcm16":
        ints = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
        tag, bits, payload = _FORMAT_PCM, 16, ints.tobytes()
    elif encoding == "float32":
        tag, bits, payload = _FORMAT_FLOAT, 32, x.astype("<f4").tobytes()
    else:
        raise UnsupportedEncoding(f"cannot write encoding {encoding!r}")
    block = bits // 8
    fmt = struct.pack("<HHIIHH", tag, 1, clip.sample_rate, clip.sample_rate * block, block, bits)
    out = io.BytesIO()
    out.write(b"RIFF")
    out.write(struct.pack("<I", 4 + 8 + len(fmt) + 8 + len(payload) + (len(payload) & 1)))
    out.write(b"WAVE")
    out.write(b"fmt " + struct.pack("<I", len(fmt)) + fmt)
    out.write(b"data" + struct.pack("<I", len(payload)) + payload)
    if len(payload) & 1:
        out.write(b"\x00")
    return out.getvalue()


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_wav(path, clip: AudioClip, encoding: str = "pcm16") -> None:
    atomic_write_bytes(path, encode_wav(clip, encoding))


# --------------------------------------------------------------------------
# level and framing

def peak_normalize(clip: AudioClip, target_peak: float = 1.0) -> AudioClip:
    if not (0.0 < target_peak <= 1.0):
        raise ValueError("target_peak must lie in (0, 1]")
    peak = float(np.max(np.abs(clip.samples))) if len(clip) else 0.0
    if peak == 0.0:
        return clip
    return clip.with_samples(clip.samples * (target_peak / peak))


def frame_starts(n_samples: int, frame_len: int, hop: int) -> np.ndarray:
    if n_samples < frame_len:
        raise ClipTooShort(f"{n_samples} samples is shorter than one {frame_len}-sample frame")
    count = (n_samples - frame_len) // hop + 1
    return np.arange(count) * hop


def frame_matrix(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Unwindowed frames, one per row (a strided copy)."""
    starts = frame_starts(len(x), frame_len, hop)
    idx = starts[:, None] + np.arange(frame_len)[None, :]
    return np.asarray(x)[idx]


def frames(clip: AudioClip, cfg: FrameConfig = FrameConfig()):
    """Return ``(windowed_frames, start_times_s)``.

    Frame count is ``floor((N - L) / H) + 1``; raises ClipTooShort when the
    clip holds less than one frame.
    """
    L = cfg.frame_length(clip.sample_rate)
    H = cfg.hop_length(clip.sample_rate)
    raw = frame_matrix(clip.samples, L, H)
    times = frame_starts(len(clip), L, H) / clip.sample_rate
    return raw * cfg.window_array(L)[None, :], times


def spectral_gate(clip: AudioClip, cfg: FrameConfig = FrameConfig(),
                  quiet_fraction: float = 0.10, floor: float = 0.1) -> AudioClip:
    """Stationary-noise reduction by spectral subtraction.

    The noise magnitude profile is the mean spectrum of the quietest
    ``quiet_fraction`` of frames. It is subtracted from every frame and the
    result floored at ``floor`` times the profile.
    """
    L = cfg.frame_length(clip.sample_rate)
    H = cfg.hop_length(clip.sample_rate)
    if len(clip) < L:
        raise ClipTooShort("clip shorter than one frame")
    _, _, Z = signal.stft(clip.samples, nperseg=L, noverlap=L - H, window="hann",
                          boundary="even", padded=True)
    mag = np.abs(Z)
    energy = np.sum(mag ** 2, axis=0)
    k = max(1, int(np.ceil(quiet_fraction * mag.shape[1])))
    quiet = np.argsort(energy, kind="stable")[:k]
    profile = mag[:, quiet].mean(axis=1, keepdims=True)
    cleaned = np.maximum(mag - profile, floor * profile)
    Zc = cleaned * np.exp(1j * np.angle(Z))
    _, y = signal.istft(Zc, nperseg=L, noverlap=L - H, window="hann", boundary=True)
    y = y[: len(clip)]
    if len(y) < len(clip):
        y = np.pad(y, (0, len(clip) - len(y)))
    return clip.with_samples(np.clip(y, -1.0, 1.0))


# --------------------------------------------------------------------------
# manifest

MANIFEST_HEADER = ("path", "label", "cow_id")


@dataclass(frozen=True)
class ManifestEntry:
    wav_path: str
    label: Optional[CallLabel]
    cow_id: str


@dataclass
class CorpusManifest:
    entries: list = field(default_factory=list)

    def __post_init__(self):
        paths = [e.wav_path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest paths must be unique")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for e in self.entries:
            w.writerow([e.wav_path, e.label.value if e.label else "", e.cow_id])
        return buf.getvalue()

    def save(self, path) -> None:
        atomic_write_text(path, self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "CorpusManifest":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(h.strip() for h in rows[0]) != MANIFEST_HEADER:
            raise ValueError(f"manifest header must be {','.join(MANIFEST_HEADER)}")
        entries = []
        for row in rows[1:]:
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"manifest row has {len(row)} fields: {row}")
            label = CallLabel.parse(row[1]) if row[1].strip() else None
            entries.append(ManifestEntry(row[0], label, row[2]))
        return cls(entries)

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))

    def resolve(self, entry: ManifestEntry, base) -> Path:
        p = Path(entry.wav_path)
        return p if p.is_absolute() else Path(base) / p


def iter_wav_paths(directory) -> Iterable[Path]:
    return sorted(p for p in Path(directory).iterdir() if p.suffix.lower() == ".wav")
