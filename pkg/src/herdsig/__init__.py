"""Cow-call analysis: segmentation, acoustic features, HFC/LFC classification."""

from .audio_io import AudioClip, FrameConfig, load_wav, write_wav
from .labels import CallLabel

__version__ = "0.1.0"

__all__ = ["AudioClip", "FrameConfig", "CallLabel", "load_wav", "write_wav", "__version__"]
