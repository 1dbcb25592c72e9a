"""Configuration objects and named presets.

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
import math

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import yaml

from .common import *
from .core import DEFAULT_EPSILON
from .type import DEFAULT_THRESHOLDS, EmotionThresholds

@dataclass(frozen=True)
class CaptureWeights:
    """Weights of the emotion, novelty and complexity channels of MemScore."""
    w_e: float
    w_n: float
    w_c: float

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        for name in ("w_e", "w_n", "w_c"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"Weight {name} must be a non-negative real, got {value}")
        if abs(self.w_e + self.w_n + self.w_c - 1.0) > 1e-9:
            raise ConfigError(f"Weights must sum to 1, got {self.w_e} + {self.w_n} + {self.w_c}")

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.w_e, self.w_n, self.w_c)

    def label(self) -> str:
        return f"({self.w_e:.1f}, {self.w_n:.1f}, {self.w_c:.1f})"

    @classmethod
    def parse(cls, text: str) -> "CaptureWeights":
        """Parse 'w_e,w_n,w_c'."""
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 3:
            raise ConfigError(f"Expected three comma separated weights, got {text!r}")
        try:
            return cls(*(float(p) for p in parts))
        except ValueError:
            raise ConfigError(f"Illegal weights {text!r}") from None

# Weight configurations of the memorability study.
# Complexity is excluded from the deployed system (w_c = 0).
WEIGHT_CONFIGS: Dict[str, CaptureWeights] = {
    "emotion+novelty":            CaptureWeights(0.5, 0.5, 0.0),
    "emotion":                    CaptureWeights(1.0, 0.0, 0.0),
    "emotion+novelty+complexity": CaptureWeights(0.5, 0.3, 0.2),
    "emotion+complexity":         CaptureWeights(0.5, 0.0, 0.5),
    "novelty":                    CaptureWeights(0.0, 1.0, 0.0),
    "complexity":                 CaptureWeights(0.0, 0.0, 1.0),
}

DEFAULT_WEIGHTS = WEIGHT_CONFIGS["emotion+novelty"]

def get_weights_by_name(name: str) -> Optional[CaptureWeights]:
    return WEIGHT_CONFIGS.get(name)

@dataclass(frozen=True)
class NoveltyConfig:
    """Novelty gate, in cosine-distance units."""
    threshold_t_n: float = 0.3

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold_t_n <= 2.0:
            raise ConfigError(f"Novelty threshold must be in [0, 2], got {self.threshold_t_n}")

@dataclass(frozen=True)
class BurninConfig:
    """Repeated burn-in novelty of the evaluation protocol."""
    burn_in_k: int = 5
    repeats: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.burn_in_k < 1:
            raise ConfigError(f"burn_in_k must be positive, got {self.burn_in_k}")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be positive, got {self.repeats}")

@dataclass(frozen=True)
class RetrievalConfig:
    """Hybrid retrieval parameters."""
    alpha: float = 0.7
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")

@dataclass(frozen=True)
class SyntheticWorldConfig:
    """Parameters of the deterministic synthetic encoders."""
    seed: int = 0
    dim: int = 64
    concept_count: int = 32
    image_noise: float = 0.8
    text_noise: float = 0.8

    # Required gap between mean same-concept and mean cross-concept image similarity
    separability_margin: float = 0.05

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ConfigError(f"dim must be positive, got {self.dim}")
        if self.concept_count < 2:
            raise ConfigError(f"concept_count must be at least 2, got {self.concept_count}")
        for name in ("image_noise", "text_noise", "separability_margin"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be a non-negative real, got {value}")

# Default candidate values for every threshold searched by the inner CV loop
DEFAULT_THRESHOLD_GRID = tuple(round(0.05 * i, 2) for i in range(20))

class NoveltyVariant(enum.Enum):
    """How burn-in novelty enters the novelty channel of MemScore."""

    # max(0, (n - T_n) / (2 - T_n))
    NORMALIZED = "normalized"

    # n as is, T_n is not searched
    RAW        = "raw"

@dataclass(frozen=True)
class CvConfig:
    """Repeated stratified nested cross-validation."""
    outer_folds: int = 5
    inner_folds: int = 3
    repeats: int = 20
    seed: int = 0
    strat_bins: int = 5
    weight_grid: Tuple[Tuple[str, CaptureWeights], ...] = tuple(WEIGHT_CONFIGS.items())
    threshold_grid: Tuple[float, ...] = DEFAULT_THRESHOLD_GRID
    novelty_grid: Tuple[float, ...] = DEFAULT_THRESHOLD_GRID
    novelty_variant: NoveltyVariant = NoveltyVariant.NORMALIZED
    search_passes: int = 2
    n_workers: int = 1

    def __post_init__(self) -> None:
        if self.outer_folds < 2:
            raise ConfigError(f"outer_folds must be at least 2, got {self.outer_folds}")
        if self.inner_folds < 2:
            raise ConfigError(f"inner_folds must be at least 2, got {self.inner_folds}")
        if self.repeats < 1 or self.strat_bins < 1 or self.search_passes < 1 or self.n_workers < 1:
            raise ConfigError("repeats, strat_bins, search_passes and n_workers must be positive")
        if not self.weight_grid or not self.threshold_grid or not self.novelty_grid:
            raise ConfigError("Search grids must not be empty")
        if any(not 0.0 <= t < 1.0 for t in self.threshold_grid):
            raise ConfigError("Emotion thresholds must be in [0, 1)")
        if any(not 0.0 <= t <= 2.0 for t in self.novelty_grid):
            raise ConfigError("Novelty thresholds must be in [0, 2]")

@dataclass
class CliConfig:
    """Settings of the command line interface.

    Loaded from a single YAML document; every key can be overridden by the
    command line flag of the same name.
    """
    store_path: Path = Path("memory.store")
    encoder: str = "synthetic"
    seed: int = 0
    alpha: float = 0.7
    epsilon: float = DEFAULT_EPSILON
    t_n: float = 0.3
    weights: CaptureWeights = DEFAULT_WEIGHTS
    emotion_thresholds: EmotionThresholds = DEFAULT_THRESHOLDS
    intent_patterns: Optional[Path] = None
    text_dim: int = 64
    mm_dim: int = 64
    image_noise: float = 0.8
    text_noise: float = 0.8

    def validate(self) -> None:
        """Check ranges and build the derived configs once to surface errors early."""
        if not (self.encoder == "synthetic" or self.encoder.startswith("remote:")):
            raise ConfigError(f"encoder must be 'synthetic' or 'remote:<endpoint>', got {self.encoder!r}")
        if self.encoder == "synthetic" and self.text_dim != self.mm_dim:
            raise ConfigError("The synthetic encoders use a single dimension, text_dim must equal mm_dim")
        if self.intent_patterns is not None and not Path(self.intent_patterns).is_file():
            raise ConfigError(f"Intent pattern file not found: {self.intent_patterns}")
        self.retrieval_config()
        self.novelty_config()
        self.world_config()

    def retrieval_config(self) -> RetrievalConfig:
        return RetrievalConfig(alpha = self.alpha, epsilon = self.epsilon)

    def novelty_config(self) -> NoveltyConfig:
        return NoveltyConfig(threshold_t_n = self.t_n)

    def world_config(self) -> SyntheticWorldConfig:
        return SyntheticWorldConfig(seed = self.seed, dim = self.text_dim,
                                    image_noise = self.image_noise, text_noise = self.text_noise)

def parse_thresholds(text: str, base: EmotionThresholds = DEFAULT_THRESHOLDS) -> EmotionThresholds:
    """Parse 'happy=0.6,sad=0.4' on top of `base`."""
    values = base.to_dict()
    for item in filter(None, (p.strip() for p in str(text).split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"Expected 'category=value', got {item!r}")
        key = key.strip().lower()
        if key not in values:
            raise ConfigError(f"Unknown emotion category {key!r}")
        try:
            values[key] = float(value)
        except ValueError:
            raise ConfigError(f"Illegal threshold {item!r}") from None
    try:
        return EmotionThresholds(values)
    except ThresholdError as e:
        raise ConfigError(str(e)) from None

def _coerce(name: str, value):
    """Convert a raw YAML/flag value to the type of the CliConfig field `name`."""
    if name in ("store_path", "intent_patterns"):
        return None if value is None else Path(value)
    if name == "weights":
        if isinstance(value, (list, tuple)):
            return CaptureWeights(*(float(v) for v in value))
        return CaptureWeights.parse(value)
    if name == "emotion_thresholds":
        if isinstance(value, dict):
            return parse_thresholds(",".join(f"{k}={v}" for k, v in value.items()))
        return parse_thresholds(value)
    if name in ("seed", "text_dim", "mm_dim"):
        return int(value)
    if name in ("alpha", "epsilon", "t_n", "image_noise", "text_noise"):
        return float(value)
    return str(value)

def apply_overrides(config: CliConfig, overrides: Dict[str, object]) -> CliConfig:
    """Return a copy of `config` with the non-None `overrides` applied."""
    known = {f.name for f in fields(CliConfig)}
    changes = {}
    for name, value in overrides.items():
        if value is None:
            continue
        if name not in known:
            raise ConfigError(f"Unknown configuration key {name!r}")
        try:
            changes[name] = _coerce(name, value)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"Illegal value for {name}: {value!r}") from None
    return replace(config, **changes)

def load_cli_config(path: Optional[Union[str, Path]]) -> CliConfig:
    """Load a CliConfig from a YAML document (or the defaults if `path` is None).

    Raises:
        ConfigError: The file is missing, is not a mapping or holds illegal values.
    """
    if path is None:
        return CliConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Configuration file not found: {path}")
    try:
        document = yaml.safe_load(path.read_text(encoding = "utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Malformed configuration file {path}: {e}") from None
    if not isinstance(document, dict):
        raise ConfigError(f"Configuration file {path} must hold a mapping")
    return apply_overrides(CliConfig(), document)
