"""Repeated stratified nested cross-validation of the memorability score.

Per repeat, images are split into outer folds stratified by mean rating.
For each outer fold an inner cross-validation on the remaining images picks
the per-emotion thresholds and the novelty threshold that maximize the mean
inner-fold Spearman correlation between MemScore and the ratings; the picked
parameters are then scored on the held-out fold. The search is a coordinate
ascent: the novelty threshold first, then every emotion threshold in
category order, repeated for a fixed number of passes.

Feature tables are CSV files with the columns

    image_id,neutral,happy,sad,surprise,fear,disgust,anger,contempt,novelty[,complexity]

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
import logging

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from scipy import stats

from ..common import *
from ..config import CaptureWeights, CvConfig, NoveltyVariant
from ..type import DEFAULT_THRESHOLDS, EMOTIONS
from ..utils import spawn_generators
from .stats import fisher_combined, spearman_test

logger = logging.getLogger(__name__)

EMOTION_COLUMNS = tuple(e.value for e in EMOTIONS)

# Starting point of the threshold search
INITIAL_T_N = 0.3

# Improvement a candidate needs to replace the current value
_IMPROVEMENT = 1e-12

@dataclass(frozen=True)
class MemorabilityFeatures:
    """Per-image inputs of MemScore."""
    image_ids: Tuple[str, ...]
    emotions: np.ndarray
    novelty: np.ndarray
    complexity: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.image_ids)
        object.__setattr__(self, "image_ids", tuple(str(i) for i in self.image_ids))
        object.__setattr__(self, "emotions", np.asarray(self.emotions, dtype = np.float64))
        object.__setattr__(self, "novelty", np.asarray(self.novelty, dtype = np.float64))
        object.__setattr__(self, "complexity", np.asarray(self.complexity, dtype = np.float64))
        if self.emotions.shape != (n, len(EMOTIONS)) or self.novelty.shape != (n,) \
                or self.complexity.shape != (n,):
            raise SchemaError("Feature arrays don't match the number of images")
        if len(set(self.image_ids)) != n:
            raise SchemaError("Image ids must be unique")
        for name, values, high in (("emotions", self.emotions, 1.0), ("novelty", self.novelty, 2.0),
                                   ("complexity", self.complexity, 1.0)):
            if not np.all(np.isfinite(values)) or np.any(values < 0.0) or np.any(values > high):
                raise SchemaError(f"{name} must be in [0, {high}]")

    def __len__(self) -> int:
        return len(self.image_ids)

    def subset(self, indices: np.ndarray) -> "MemorabilityFeatures":
        return MemorabilityFeatures(
            image_ids = tuple(self.image_ids[i] for i in indices),
            emotions = self.emotions[indices],
            novelty = self.novelty[indices],
            complexity = self.complexity[indices],
        )

    def align(self, image_ids: Sequence[str]) -> "MemorabilityFeatures":
        """Reorder to `image_ids`."""
        position = {image_id: i for i, image_id in enumerate(self.image_ids)}
        missing = [i for i in image_ids if str(i) not in position]
        if missing:
            raise SchemaError(f"No features for images: {', '.join(map(str, missing[:5]))}")
        return self.subset(np.array([position[str(i)] for i in image_ids], dtype = np.int64))

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "MemorabilityFeatures":
        missing = [c for c in ("image_id",) + EMOTION_COLUMNS + ("novelty",) if c not in frame.columns]
        if missing:
            raise SchemaError(f"Feature table lacks columns: {', '.join(missing)}")
        complexity = frame["complexity"] if "complexity" in frame.columns else np.zeros(len(frame))
        try:
            return cls(
                image_ids = tuple(frame["image_id"].astype(str)),
                emotions = frame[list(EMOTION_COLUMNS)].to_numpy(dtype = np.float64),
                novelty = frame["novelty"].to_numpy(dtype = np.float64),
                complexity = np.asarray(complexity, dtype = np.float64),
            )
        except (TypeError, ValueError) as e:
            if isinstance(e, SchemaError):
                raise
            raise SchemaError(f"Non-numeric feature values: {e}") from None

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "MemorabilityFeatures":
        try:
            frame = pd.read_csv(path)
        except (OSError, pd.errors.ParserError) as e:
            raise SchemaError(f"Unable to read features {path}: {e}") from None
        return cls.from_frame(frame)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.emotions, columns = list(EMOTION_COLUMNS))
        frame.insert(0, "image_id", list(self.image_ids))
        frame["novelty"] = self.novelty
        frame["complexity"] = self.complexity
        return frame

def emotion_channel(emotions: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Frame salience for every image (and every threshold row).

    Args:
        emotions:
            (n, 8) probabilities.
        thresholds:
            (8,) thresholds, or (c, 8) candidate rows giving a (c, n) result.
    """
    t = np.asarray(thresholds, dtype = np.float64)
    if t.ndim == 2:
        t = t[:, None, :]
    return np.max(np.maximum(0.0, (emotions - t) / (1.0 - t)), axis = -1)

def novelty_channel(novelty: np.ndarray, t_n, variant: NoveltyVariant) -> np.ndarray:
    """Novelty channel for every image; `t_n` may be a (c, 1) column of candidates."""
    if variant is NoveltyVariant.RAW:
        return novelty / 2.0
    t_n = np.asarray(t_n, dtype = np.float64)
    span = 2.0 - t_n
    scaled = np.divide(novelty - t_n, span, out = np.zeros(np.broadcast(novelty, t_n).shape), where = span > 0)
    return np.maximum(0.0, scaled)

def memscore(features: MemorabilityFeatures, weights: CaptureWeights, thresholds, t_n,
             variant: NoveltyVariant = NoveltyVariant.NORMALIZED) -> np.ndarray:
    """MemScore of every image under the given parameters."""
    score = weights.w_c * features.complexity
    if weights.w_e > 0:
        score = score + weights.w_e * emotion_channel(features.emotions, thresholds)
    if weights.w_n > 0:
        score = score + weights.w_n * novelty_channel(features.novelty, t_n, variant)
    return score

def stratified_folds(y: np.ndarray, n_folds: int, n_bins: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Split indices into folds balanced over quantile bins of `y`.

    Raises:
        ConfigError: Some fold would hold fewer than 3 items.
    """
    n = len(y)
    if n < 3 * n_folds:
        raise ConfigError(f"{n} items are too few for {n_folds} folds of at least 3 items")
    order = stats.rankdata(y, method = "ordinal").astype(np.int64) - 1
    bins = order * min(n_bins, n) // n
    assignment = np.empty(n, dtype = np.int64)
    offset = 0
    for b in range(min(n_bins, n)):
        members = np.flatnonzero(bins == b)
        members = members[rng.permutation(members.size)]
        assignment[members] = (offset + np.arange(members.size)) % n_folds
        offset += members.size
    return [np.flatnonzero(assignment == f) for f in range(n_folds)]

def _row_pearson(rows: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pearson correlation of every row with `y`; 0 where undefined."""
    d_rows = rows - rows.mean(axis = 1, keepdims = True)
    d_y = y - y.mean()
    num = d_rows @ d_y
    den = np.sqrt((d_rows ** 2).sum(axis = 1) * np.dot(d_y, d_y))
    return np.divide(num, den, out = np.zeros_like(num), where = den > 0)

def mean_fold_rho(scores: np.ndarray, y: np.ndarray, folds: List[np.ndarray]) -> np.ndarray:
    """Mean Spearman rho over folds for each row of `scores` (degenerate folds count as 0)."""
    scores = np.atleast_2d(scores)
    total = np.zeros(scores.shape[0])
    for idx in folds:
        total += _row_pearson(stats.rankdata(scores[:, idx], axis = 1), stats.rankdata(y[idx]))
    return total / len(folds)

def _snap(value: float, grid: Sequence[float]) -> float:
    grid = np.asarray(grid, dtype = np.float64)
    return float(grid[np.argmin(np.abs(grid - value))])

@dataclass(frozen=True)
class SelectedParameters:
    thresholds: np.ndarray
    t_n: float
    inner_rho: float

    def to_dict(self) -> dict:
        return {
            "thresholds": {name: float(t) for name, t in zip(EMOTION_COLUMNS, self.thresholds)},
            "t_n": self.t_n,
            "inner_rho": self.inner_rho,
        }

def select_parameters(features: MemorabilityFeatures, y: np.ndarray, weights: CaptureWeights,
                      folds: List[np.ndarray], cfg: CvConfig) -> SelectedParameters:
    """Coordinate ascent of the thresholds on the mean fold rho."""
    thresholds = np.array([_snap(t, cfg.threshold_grid) for t in DEFAULT_THRESHOLDS.as_list()])
    t_n = _snap(INITIAL_T_N, cfg.novelty_grid)
    variant = cfg.novelty_variant

    def evaluate(rows: np.ndarray, t_ns: np.ndarray) -> np.ndarray:
        return mean_fold_rho(memscore(features, weights, rows, t_ns[:, None], variant), y, folds)

    current = float(evaluate(thresholds[None, :], np.array([t_n]))[0])
    search_novelty = weights.w_n > 0 and variant is NoveltyVariant.NORMALIZED
    grid = np.asarray(cfg.threshold_grid, dtype = np.float64)

    for _ in range(cfg.search_passes):
        changed = False
        if search_novelty:
            candidates = np.asarray(cfg.novelty_grid, dtype = np.float64)
            values = evaluate(np.tile(thresholds, (candidates.size, 1)), candidates)
            best = int(np.argmax(values))
            if values[best] > current + _IMPROVEMENT:
                t_n, current, changed = float(candidates[best]), float(values[best]), True
        if weights.w_e > 0:
            for k in range(len(EMOTIONS)):
                rows = np.tile(thresholds, (grid.size, 1))
                rows[:, k] = grid
                values = evaluate(rows, np.full(grid.size, t_n))
                best = int(np.argmax(values))
                if values[best] > current + _IMPROVEMENT:
                    thresholds[k], current, changed = grid[best], float(values[best]), True
        if not changed:
            break

    return SelectedParameters(thresholds = thresholds, t_n = t_n, inner_rho = current)

@dataclass
class CvResult:
    """Held-out fold correlations of one scoring method over all repeats."""
    name: str
    weights: Optional[CaptureWeights] = None
    fold_rhos: List[float] = field(default_factory = list)
    fold_pvalues: List[float] = field(default_factory = list)
    selected: List[SelectedParameters] = field(default_factory = list)

    @property
    def mean_rho(self) -> float:
        return float(np.mean(self.fold_rhos))

    @property
    def std_rho(self) -> float:
        return float(np.std(self.fold_rhos, ddof = 1)) if len(self.fold_rhos) > 1 else 0.0

    @property
    def fisher_p(self) -> float:
        return fisher_combined(self.fold_pvalues)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "weights": None if self.weights is None else list(self.weights.as_tuple()),
            "mean_rho": self.mean_rho,
            "std_rho": self.std_rho,
            "fisher_p": self.fisher_p,
            "folds": len(self.fold_rhos),
            "fold_rhos": list(self.fold_rhos),
            "selected": [s.to_dict() for s in self.selected],
        }

@dataclass
class RepeatPlan:
    """Folds of one repeat and the rest of its random stream."""
    outer: List[np.ndarray]
    inner: List[List[np.ndarray]]
    rng: np.random.Generator

def plan_repeats(y: np.ndarray, cfg: CvConfig) -> List[RepeatPlan]:
    """Outer and inner folds of every repeat, each repeat drawn from its own stream."""
    plans = []
    for rng in spawn_generators(cfg.seed, cfg.repeats):
        outer = stratified_folds(y, cfg.outer_folds, cfg.strat_bins, rng)
        inner = []
        for test in outer:
            train = np.setdiff1d(np.arange(len(y)), test)
            inner.append(stratified_folds(y[train], cfg.inner_folds, cfg.strat_bins, rng))
        plans.append(RepeatPlan(outer = outer, inner = inner, rng = rng))
    return plans

def _test_fold(scores: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """(rho, p) on a held-out fold; an undefined correlation counts as (0, 1)."""
    try:
        return spearman_test(scores, y)
    except DegenerateInputError:
        return 0.0, 1.0

def _map_repeats(function: Callable[[RepeatPlan], list], plans: List[RepeatPlan], n_workers: int) -> list:
    if n_workers == 1:
        return [function(plan) for plan in plans]
    with ThreadPoolExecutor(max_workers = n_workers) as executor:
        return list(executor.map(function, plans))

def nested_cv_memorability(features: MemorabilityFeatures, ratings: Sequence[float],
                           cfg: CvConfig = CvConfig()) -> Dict[str, CvResult]:
    """Evaluate every weight configuration of `cfg.weight_grid`.

    Args:
        features:
            Per-image features, aligned with `ratings`.
        ratings:
            Per-image mean human rating.
        cfg:
            Protocol parameters.

    Returns:
        One CvResult per weight configuration, in grid order.

    Raises:
        SchemaError: features and ratings are not aligned.
        ConfigError: A fold would hold fewer than 3 images.
    """
    y = np.asarray(ratings, dtype = np.float64)
    if y.shape != (len(features),):
        raise SchemaError(f"{len(features)} feature rows but {y.size} ratings")
    plans = plan_repeats(y, cfg)

    def run_repeat(plan: RepeatPlan) -> list:
        results = []
        for _, weights in cfg.weight_grid:
            folds = []
            for test, inner in zip(plan.outer, plan.inner):
                train = np.setdiff1d(np.arange(len(y)), test)
                selected = select_parameters(features.subset(train), y[train], weights, inner, cfg)
                scores = memscore(features.subset(test), weights, selected.thresholds, selected.t_n,
                                  cfg.novelty_variant)
                folds.append(_test_fold(scores, y[test]) + (selected,))
            results.append(folds)
        return results

    per_repeat = _map_repeats(run_repeat, plans, cfg.n_workers)

    results = {name: CvResult(name = name, weights = weights) for name, weights in cfg.weight_grid}
    for repeat in per_repeat:
        for (name, _), folds in zip(cfg.weight_grid, repeat):
            for rho, p, selected in folds:
                results[name].fold_rhos.append(rho)
                results[name].fold_pvalues.append(p)
                results[name].selected.append(selected)
    for result in results.values():
        logger.info("%s: rho %.4f +- %.4f over %d folds", result.name, result.mean_rho, result.std_rho,
                    len(result.fold_rhos))
    return results

def evaluate_fixed_scores(name: str, score_fn: Callable[[np.random.Generator], np.ndarray],
                          ratings: Sequence[float], cfg: CvConfig = CvConfig()) -> CvResult:
    """Score a parameter-free method on the same held-out outer folds.

    `score_fn` receives the repeat's random stream and returns one score per image.
    """
    y = np.asarray(ratings, dtype = np.float64)
    plans = plan_repeats(y, cfg)
    result = CvResult(name = name)
    for plan in plans:
        scores = np.asarray(score_fn(plan.rng), dtype = np.float64)
        if scores.shape != y.shape:
            raise SchemaError(f"{name} produced {scores.size} scores for {y.size} images")
        for test in plan.outer:
            rho, p = _test_fold(scores[test], y[test])
            result.fold_rhos.append(rho)
            result.fold_pvalues.append(p)
    return result
