"""Emotion label set and the ShEMO tag vocabulary."""

from __future__ import annotations

import enum


class EmotionLabel(enum.IntEnum):
    """Model target classes, coded in descending ShEMO support."""

    ANGER = 0
    NEUTRAL = 1
    SADNESS = 2
    SURPRISE = 3
    HAPPINESS = 4

    @property
    def tag(self) -> str:
        return self.name.lower()

    @classmethod
    def from_tag(cls, tag: str) -> "EmotionLabel":
        try:
            return cls[tag.upper()]
        except KeyError:
            raise ValueError(f"not a model target label: {tag!r}") from None


# Ingestion-only tag. Never a model target.
FEAR = "fear"

N_CLASSES = len(EmotionLabel)
TARGET_TAGS: tuple[str, ...] = tuple(label.tag for label in EmotionLabel)
SHEMO_TAGS: frozenset[str] = frozenset(TARGET_TAGS) | {FEAR}

# Fourth character of a ShEMO file stem: F01A01 -> "A".
SHEMO_EMOTION_CODES = {
    "A": "anger",
    "N": "neutral",
    "S": "sadness",
    "W": "surprise",
    "H": "happiness",
    "F": FEAR,
}
