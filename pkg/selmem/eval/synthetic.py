"""Synthetic memorability studies with planted ground truth.

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

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..common import *
from ..config import DEFAULT_WEIGHTS, BurninConfig, CaptureWeights, NoveltyVariant, SyntheticWorldConfig
from ..encoders.synthetic import SyntheticWorld
from ..perception.novelty import burnin_novelty
from ..type import EMOTIONS, Emotion, EmotionThresholds
from .crossval import MemorabilityFeatures, memscore
from .ratings import RATING_MAX, RATING_MIN, RatingsMatrix

logger = logging.getLogger(__name__)

# Thresholds planted by default: neutral faces rarely count, every other emotion above 0.4 does
PLANTED_THRESHOLDS = EmotionThresholds({e: (0.9 if e is Emotion.NEUTRAL else 0.4) for e in EMOTIONS})

@dataclass(frozen=True)
class SyntheticStudy:
    features: MemorabilityFeatures
    ratings: RatingsMatrix
    true_scores: np.ndarray
    thresholds: EmotionThresholds
    t_n: float
    weights: CaptureWeights

def make_synthetic_memorability_study(n_images: int = 81, n_raters: int = 20, seed: int = 0,
                                      thresholds: EmotionThresholds = PLANTED_THRESHOLDS,
                                      t_n: float = 0.3, weights: CaptureWeights = DEFAULT_WEIGHTS,
                                      rater_noise: float = 1.0, round_ratings: bool = True,
                                      burnin: BurninConfig = BurninConfig(repeats = 100),
                                      world_cfg: Optional[SyntheticWorldConfig] = None,
                                      variant: NoveltyVariant = NoveltyVariant.NORMALIZED) -> SyntheticStudy:
    """Images with random emotions, scenes and complexity, rated from their planted MemScore.

    Each rater reports 1 + 8 * MemScore plus Gaussian noise, clipped to the
    rating scale and optionally rounded to whole points.
    """
    if n_images <= burnin.burn_in_k or n_raters < 1:
        raise ConfigError("Need more images than the burn-in and at least one rater")
    if rater_noise < 0:
        raise ConfigError(f"rater_noise must be non-negative, got {rater_noise}")
    rng = np.random.default_rng(seed)

    emotions = rng.dirichlet(np.full(len(EMOTIONS), 0.4), size = n_images)

    world = SyntheticWorld(world_cfg if world_cfg is not None else SyntheticWorldConfig(seed = seed, concept_count = 16))
    concepts = rng.integers(len(world.concepts), size = n_images)
    embeddings = []
    for i, c in enumerate(concepts):
        ref = f"study/{seed}/{i:04d}"
        world.register_image(ref, world.concepts[c])
        embeddings.append(world.embed_image(ref))
    scored = burnin_novelty(embeddings, burnin)
    fill = float(np.mean(list(scored.values())))
    novelty = np.array([scored.get(i, fill) for i in range(n_images)])

    features = MemorabilityFeatures(
        image_ids = tuple(f"img{i:04d}" for i in range(n_images)),
        emotions = emotions,
        novelty = np.clip(novelty, 0.0, 2.0),
        complexity = rng.uniform(0.0, 1.0, size = n_images),
    )
    true_scores = memscore(features, weights, np.array(thresholds.as_list()), t_n, variant)

    base = RATING_MIN + (RATING_MAX - RATING_MIN) * true_scores
    values = base[None, :] + rng.normal(0.0, rater_noise, size = (n_raters, n_images))
    values = np.clip(values, RATING_MIN, RATING_MAX)
    if round_ratings:
        values = np.round(values)
    ratings = RatingsMatrix(values, [f"r{r:03d}" for r in range(n_raters)], list(features.image_ids))

    logger.debug("Synthetic study: %d images, %d raters, seed %d", n_images, n_raters, seed)
    return SyntheticStudy(features, ratings, true_scores, thresholds, t_n, weights)
