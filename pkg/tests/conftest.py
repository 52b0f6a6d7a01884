import numpy as np
import pytest
from hypothesis import settings

from herdsig import synth
from herdsig.audio_io import AudioClip, CorpusManifest, load_wav
from herdsig.features import CSV_HEADER, features_to_csv, read_feature_csv
from herdsig.labels import CallLabel
from herdsig.pipeline import extract_clip

settings.register_profile("herdsig", deadline=None, max_examples=40, derandomize=True,
                          print_blob=True)
settings.load_profile("herdsig")

SR = 16000


def tone(freq, dur=0.5, amp=0.5, sr=SR, phase=0.0):
    t = np.arange(int(round(dur * sr))) / sr
    return amp * np.sin(2 * np.pi * freq * t + phase)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def hfc_spec():
    return synth.sample_spec(CallLabel.HFC, 11)


@pytest.fixture(scope="session")
def lfc_spec():
    return synth.sample_spec(CallLabel.LFC, 12)


@pytest.fixture(scope="session")
def hfc_clip(hfc_spec):
    return synth.render(hfc_spec, source_id="hfc")


@pytest.fixture(scope="session")
def lfc_clip(lfc_spec):
    return synth.render(lfc_spec, source_id="lfc")


@pytest.fixture
def tone_clip():
    return AudioClip(tone(440.0), SR, "tone")


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Ten calls per class, exclude-overlap, seed 7."""
    out = tmp_path_factory.mktemp("corpus")
    synth.make_corpus(10, 7, out)
    return out


def extract_corpus(corpus_dir):
    """Feature records (parsed back from CSV), MFCC sequences and the CSV text."""
    rows, seqs = [], {}
    for e in CorpusManifest.load(corpus_dir / "manifest.csv"):
        r, s = extract_clip(load_wav(corpus_dir / e.wav_path), e.label, with_sequences=True)
        rows += r
        seqs.update(s)
    text = features_to_csv(rows)
    header, records = read_feature_csv(text)
    assert header == CSV_HEADER
    return records, seqs, text


@pytest.fixture(scope="session")
def small_records(small_corpus):
    return extract_corpus(small_corpus)[:2]
