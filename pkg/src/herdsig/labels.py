from __future__ import annotations

from enum import Enum


class CallLabel(str, Enum):
    """The two call classes. HFC is the positive (alarm) class everywhere."""

    HFC = "HFC"
    LFC = "LFC"

    @property
    def description(self) -> str:
        return "Distress/Arousal" if self is CallLabel.HFC else "Contentment/Calm"

    @property
    def polarity(self) -> str:
        return "negative" if self is CallLabel.HFC else "positive"

    @property
    def as_int(self) -> int:
        return 1 if self is CallLabel.HFC else 0

    @classmethod
    def parse(cls, value: "str | CallLabel | int") -> "CallLabel":
        if isinstance(value, CallLabel):
            return value
        if isinstance(value, (int,)) and not isinstance(value, bool):
            if value in (0, 1):
                return cls.HFC if value == 1 else cls.LFC
            raise ValueError(f"label int must be 0 or 1, got {value}")
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"unknown call label {value!r}") from None
