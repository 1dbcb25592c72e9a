"""Value types of the perception layer: emotions, thresholds and gate triggers.

License:
    MIT License

    Permission is hereby granted, free of charge, to any person obtaining a copy
    of this software and associated documentation files (the "Software"), to deal
    in the Software without restriction, including without limitation the rights
    to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
    copies of the Software, and to permit persons to whom the Software is
    furnished to do so, subject to the following conditions:

    The above copyright notice and this permission notice shall be included in all
    copies or substantial portions of the Software.

    THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
    IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
    FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
    AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
    LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
    OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
    SOFTWARE.

"""
import enum

from types import MappingProxyType
from dataclasses import dataclass
from typing import FrozenSet, Mapping, Optional, Union

from .common import *

class Emotion(enum.Enum):
    """The eight discrete emotion categories reported by the detector.

    Iteration order is fixed and used wherever a category order matters
    (threshold search, feature tables).
    """
    NEUTRAL  = "neutral"
    HAPPY    = "happy"
    SAD      = "sad"
    SURPRISE = "surprise"
    FEAR     = "fear"
    DISGUST  = "disgust"
    ANGER    = "anger"
    CONTEMPT = "contempt"

EMOTIONS = tuple(Emotion)

class Trigger(enum.Enum):
    """Conditions that can make a frame memorable."""

    # At least one emotion exceeds its threshold
    EMOTION     = "emotion"

    # The scene is far enough from every stored scene
    NOVELTY     = "novelty"

    # No scene was stored for the user yet
    FIRST_SCENE = "first_scene"

class FirstScene(enum.Enum):
    """Novelty marker for a user without stored scenes."""
    FIRST_SCENE = "first_scene"

    def __repr__(self) -> str:
        return "FIRST_SCENE"

FIRST_SCENE = FirstScene.FIRST_SCENE

# Novelty score, or the first-scene marker
Novelty = Union[float, FirstScene]

def _parse_categories(values: Mapping, what: str) -> dict:
    """Convert a mapping keyed by Emotion or category name into {Emotion: float}."""
    parsed = {}
    for key, value in values.items():
        try:
            emotion = key if isinstance(key, Emotion) else Emotion(str(key).lower())
        except ValueError:
            raise SchemaError(f"Unknown emotion category in {what}: {key!r}") from None
        parsed[emotion] = float(value)
    missing = [e.value for e in EMOTIONS if e not in parsed]
    if missing:
        raise SchemaError(f"{what} is missing categories: {', '.join(missing)}")
    return parsed

class EmotionVector():
    """Per-category emotion probabilities of a single frame."""

    __slots__ = ("_probabilities",)

    def __init__(self, probabilities: Mapping) -> None:
        parsed = _parse_categories(probabilities, "EmotionVector")
        for emotion, p in parsed.items():
            if not 0.0 <= p <= 1.0:
                raise SchemaError(f"Probability of {emotion.value} must be in [0, 1], got {p}")
        self._probabilities = MappingProxyType({e: parsed[e] for e in EMOTIONS})

    @classmethod
    def zeros(cls) -> "EmotionVector":
        """Vector of a frame without any detected face."""
        return cls({e: 0.0 for e in EMOTIONS})

    @property
    def probabilities(self) -> Mapping[Emotion, float]:
        return self._probabilities

    def __getitem__(self, emotion: Emotion) -> float:
        return self._probabilities[emotion]

    def as_list(self) -> list:
        return [self._probabilities[e] for e in EMOTIONS]

    def to_dict(self) -> dict:
        return {e.value: p for e, p in self._probabilities.items()}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmotionVector):
            return NotImplemented
        return self.as_list() == other.as_list()

    def __repr__(self) -> str:
        return f"EmotionVector({self.to_dict()})"

class EmotionThresholds():
    """Per-category intensity thresholds, each in [0, 1)."""

    __slots__ = ("_thresholds",)

    def __init__(self, thresholds: Mapping) -> None:
        parsed = _parse_categories(thresholds, "EmotionThresholds")
        for emotion, t in parsed.items():
            if not 0.0 <= t < 1.0:
                raise ThresholdError(f"Threshold of {emotion.value} must be in [0, 1), got {t}")
        self._thresholds = MappingProxyType({e: parsed[e] for e in EMOTIONS})

    @classmethod
    def uniform(cls, value: float) -> "EmotionThresholds":
        return cls({e: value for e in EMOTIONS})

    @property
    def thresholds(self) -> Mapping[Emotion, float]:
        return self._thresholds

    def __getitem__(self, emotion: Emotion) -> float:
        return self._thresholds[emotion]

    def as_list(self) -> list:
        return [self._thresholds[e] for e in EMOTIONS]

    def to_dict(self) -> dict:
        return {e.value: t for e, t in self._thresholds.items()}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmotionThresholds):
            return NotImplemented
        return self.as_list() == other.as_list()

    def __repr__(self) -> str:
        return f"EmotionThresholds({self.to_dict()})"

# Deployment default: neutral faces are the common case and rarely memorable
DEFAULT_THRESHOLDS = EmotionThresholds({
    Emotion.NEUTRAL:  0.95,
    Emotion.HAPPY:    0.5,
    Emotion.SAD:      0.5,
    Emotion.SURPRISE: 0.5,
    Emotion.FEAR:     0.5,
    Emotion.DISGUST:  0.5,
    Emotion.ANGER:    0.5,
    Emotion.CONTEMPT: 0.5,
})

@dataclass(frozen=True)
class CaptureDecision:
    """Outcome of the memorability gate for one frame."""
    memorable: bool
    salience_e: float
    novelty: Novelty
    mem_score: Optional[float] = None
    triggered_by: FrozenSet[Trigger] = frozenset()

    def __post_init__(self) -> None:
        if self.memorable != bool(self.triggered_by):
            raise SchemaError("A decision is memorable if and only if some condition triggered it")

    def to_dict(self) -> dict:
        return {
            "memorable": self.memorable,
            "salience_e": self.salience_e,
            "novelty": self.novelty.value if isinstance(self.novelty, FirstScene) else self.novelty,
            "mem_score": self.mem_score,
            "triggered_by": sorted(t.value for t in self.triggered_by),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CaptureDecision":
        novelty = data["novelty"]
        return cls(
            memorable = bool(data["memorable"]),
            salience_e = float(data["salience_e"]),
            novelty = FIRST_SCENE if novelty == FIRST_SCENE.value else float(novelty),
            mem_score = None if data.get("mem_score") is None else float(data["mem_score"]),
            triggered_by = frozenset(Trigger(t) for t in data.get("triggered_by", ())),
        )
