"""Rule ontology: soft range membership over frequency, loudness and duration."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .audio_io import atomic_write_text
from .errors import MissingCoreFeature
from .labels import CallLabel

CORE_FEATURES = ("f0_mean", "amplitude_db", "duration_s")
_RAW_WEIGHTS = (0.70, 0.22, 0.09)


@dataclass(frozen=True)
class ClassRule:
    frequency_hz: tuple
    loudness_db: tuple
    duration_s: tuple

    def __post_init__(self):
        for name in ("frequency_hz", "loudness_db", "duration_s"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} range must have low < high, got ({lo}, {hi})")
            object.__setattr__(self, name, (float(lo), float(hi)))

    def ranges(self):
        return (self.frequency_hz, self.loudness_db, self.duration_s)


def _default_weights():
    s = sum(_RAW_WEIGHTS)
    return tuple(w / s for w in _RAW_WEIGHTS)


@dataclass(frozen=True)
class OntologyRules:
    hfc: ClassRule = ClassRule((110.59, 494.16), (-39.71, -2.45), (0.638, 9.581))
    lfc: ClassRule = ClassRule((72.61, 183.27), (-53.88, -8.16), (0.650, 2.921))
    weights: tuple = field(default_factory=_default_weights)
    sigma_fraction: float = 0.10

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if len(w) != 3 or any(v <= 0 for v in w):
            raise ValueError("weights must be three positive numbers")
        if abs(sum(w) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {sum(w)}")
        if self.sigma_fraction <= 0:
            raise ValueError("sigma_fraction must be positive")
        object.__setattr__(self, "weights", w)

    def rule(self, label: CallLabel) -> ClassRule:
        return self.hfc if CallLabel.parse(label) is CallLabel.HFC else self.lfc

    def to_dict(self) -> dict:
        def block(r: ClassRule):
            return {"frequency_hz": list(r.frequency_hz), "loudness_db": list(r.loudness_db),
                    "duration_s": list(r.duration_s)}
        return {
            "HFC": block(self.hfc),
            "LFC": block(self.lfc),
            "weights": {"frequency": self.weights[0], "loudness": self.weights[1],
                        "duration": self.weights[2]},
            "sigma_fraction": self.sigma_fraction,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        atomic_write_text(path, self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "OntologyRules":
        try:
            def block(b):
                return ClassRule(tuple(b["frequency_hz"]), tuple(b["loudness_db"]),
                                 tuple(b["duration_s"]))
            w = d.get("weights")
            if w is None:
                weights = _default_weights()
            elif isinstance(w, dict):
                weights = (w["frequency"], w["loudness"], w["duration"])
            else:
                weights = tuple(w)
            return cls(block(d["HFC"]), block(d["LFC"]), weights,
                       float(d.get("sigma_fraction", 0.10)))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed rules document: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "OntologyRules":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "OntologyRules":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


@dataclass(frozen=True)
class Prediction:
    label: CallLabel
    score: float
    hfc_score: float = 0.0
    lfc_score: float = 0.0

    @property
    def polarity(self) -> str:
        return polarity(self.label)

    @property
    def description(self) -> str:
        return self.label.description


def membership(value: float, lo: float, hi: float, sigma_fraction: float = 0.10) -> float:
    """1 inside ``[lo, hi]``, else ``exp(-d / sigma)`` with sigma a fraction of the width."""
    if lo <= value <= hi:
        return 1.0
    d = lo - value if value < lo else value - hi
    return math.exp(-d / (sigma_fraction * (hi - lo)))


def class_score(values, rule: ClassRule, rules: OntologyRules) -> float:
    return sum(w * membership(v, lo, hi, rules.sigma_fraction)
               for w, v, (lo, hi) in zip(rules.weights, values, rule.ranges()))


def _core_values(features) -> tuple:
    if isinstance(features, dict):
        get = features.get
    else:
        def get(name):
            return getattr(features, name, None)
    vals = []
    for name in CORE_FEATURES:
        v = get(name)
        if v is None or not math.isfinite(float(v)):
            raise MissingCoreFeature(f"{name} is missing")
        vals.append(float(v))
    return tuple(vals)


def classify(features, rules: OntologyRules = OntologyRules()) -> Prediction:
    """Label a feature vector (AcousticFeatures or a dict); exact ties go to LFC."""
    vals = _core_values(features)
    h = class_score(vals, rules.hfc, rules)
    l = class_score(vals, rules.lfc, rules)
    label = CallLabel.HFC if h > l else CallLabel.LFC
    score = h / (h + l) if h + l > 0 else 0.5
    return Prediction(label, score, h, l)


def polarity(label) -> str:
    return CallLabel.parse(label).polarity
