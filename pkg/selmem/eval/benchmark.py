"""Recall@K text-to-image retrieval benchmark with an image/text fusion sweep.

Every query is compared with the gallery twice: with the multimodal encoder
against the image embeddings, and with the text encoder against the caption
embeddings. Per query, each score vector is normalized over the gallery;
fusion ranks by alpha * image + (1 - alpha) * text.

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

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..common import *
from ..core import DEFAULT_EPSILON, Embedding, as_matrix, cosine_similarities, min_max_normalize, zscore_normalize
from ..retrieval import fuse_scores

logger = logging.getLogger(__name__)

DEFAULT_ALPHAS = tuple(round(0.1 * i, 1) for i in range(11))
DEFAULT_KS = (1, 5, 10)

NORMALIZATIONS = {
    "zscore": zscore_normalize,
    "minmax": min_max_normalize,
}

@dataclass(frozen=True)
class BenchmarkInstance:
    """Text queries against a gallery of images with captions.

    `truth` maps every query id to the id of its single matching item.
    """
    query_ids: Tuple[str, ...]
    query_texts: Tuple[str, ...]
    item_ids: Tuple[str, ...]
    image_embeddings: Tuple[Embedding, ...]
    caption_embeddings: Tuple[Embedding, ...]
    truth: Mapping[str, str]

    def __post_init__(self) -> None:
        if len(self.query_ids) != len(self.query_texts):
            raise SchemaError("Every query needs exactly one text")
        if not (len(self.item_ids) == len(self.image_embeddings) == len(self.caption_embeddings)):
            raise SchemaError("Every gallery item needs an image and a caption embedding")
        if not self.query_ids or not self.item_ids:
            raise SchemaError("A benchmark needs queries and gallery items")
        items = set(self.item_ids)
        for query_id in self.query_ids:
            if self.truth.get(query_id) not in items:
                raise SchemaError(f"Query {query_id!r} has no ground-truth gallery item")

def recall_at_k(rankings: Mapping[str, Sequence[str]], truth: Mapping[str, str], k: int) -> float:
    """Percentage of queries whose ground-truth item is among the first `k` ranked items.

    Raises:
        ConfigError: k < 1.
        SchemaError: A ranked query has no ground truth, or there are no queries.
    """
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    if not rankings:
        raise SchemaError("No rankings to evaluate")
    hits = 0
    for query_id, ranked in rankings.items():
        if query_id not in truth:
            raise SchemaError(f"Unknown query {query_id!r}")
        hits += truth[query_id] in list(ranked)[:k]
    return 100.0 * hits / len(rankings)

@dataclass
class SweepResult:
    ks: Tuple[int, ...]
    text: Dict[int, float] = field(default_factory = dict)
    image: Dict[int, float] = field(default_factory = dict)
    fusion: Dict[float, Dict[int, float]] = field(default_factory = dict)

    def best_alpha(self, k: int) -> Tuple[float, float]:
        """(alpha, R@k) of the best fusion weight; the smallest alpha wins ties."""
        alpha = min(self.fusion, key = lambda a: (-self.fusion[a][k], a))
        return alpha, self.fusion[alpha][k]

    def to_dict(self) -> dict:
        return {
            "ks": list(self.ks),
            "text": {str(k): v for k, v in self.text.items()},
            "image": {str(k): v for k, v in self.image.items()},
            "fusion": {f"{a:.1f}": {str(k): v for k, v in row.items()} for a, row in self.fusion.items()},
            "best_alpha": {str(k): self.best_alpha(k)[0] for k in self.ks},
        }

def _rank(scores: np.ndarray, item_ids: Sequence[str]) -> List[str]:
    """Item ids by descending score; equal scores keep gallery order."""
    return [item_ids[i] for i in np.argsort(-scores, kind = "stable")]

def alpha_sweep(instance: BenchmarkInstance, text_encoder, mm_encoder,
                alphas: Sequence[float] = DEFAULT_ALPHAS, ks: Sequence[int] = DEFAULT_KS,
                normalization: str = "zscore", epsilon: float = DEFAULT_EPSILON) -> SweepResult:
    """Recall@K of text-only, image-only and fused rankings for every alpha.

    Unimodal rankings use the normalized scores too, so the alpha = 0 and
    alpha = 1 fusion rows reproduce them exactly.
    """
    try:
        normalize = NORMALIZATIONS[normalization]
    except KeyError:
        raise ConfigError(f"normalization must be one of {', '.join(NORMALIZATIONS)}") from None

    images = as_matrix(instance.image_embeddings)
    captions = as_matrix(instance.caption_embeddings)
    text_queries = text_encoder.encode_text(list(instance.query_texts))

    text_norm, image_norm = [], []
    for text, query_text in zip(text_queries, instance.query_texts):
        text_norm.append(normalize(cosine_similarities(text, captions), epsilon))
        image_norm.append(normalize(cosine_similarities(mm_encoder.encode_query_multimodal(query_text), images),
                                    epsilon))

    def recalls(scores: List[np.ndarray]) -> Dict[int, float]:
        rankings = {q: _rank(s, instance.item_ids) for q, s in zip(instance.query_ids, scores)}
        return {k: recall_at_k(rankings, instance.truth, k) for k in ks}

    result = SweepResult(ks = tuple(ks), text = recalls(text_norm), image = recalls(image_norm))
    for alpha in alphas:
        result.fusion[float(alpha)] = recalls([fuse_scores(i, t, alpha) for i, t in zip(image_norm, text_norm)])
    logger.info("Alpha sweep over %d queries: text R@1 %.1f, image R@1 %.1f, best fusion R@1 %.1f",
                len(instance.query_ids), result.text[ks[0]], result.image[ks[0]], result.best_alpha(ks[0])[1])
    return result

def make_benchmark(world, n_items: Optional[int] = None, prefix: str = "bench") -> BenchmarkInstance:
    """A gallery of synthetic images with one text query per item.

    Item `i` is an image of concept `i mod C`. Its query names the concept and
    the first modifier word of the item's caption, so the image channel
    narrows the concept while the text channel separates items of one concept.

    Args:
        world:
            A SyntheticWorld; its images are registered as `<prefix>/<index>`.
        n_items:
            Number of gallery items (default: one per concept).
    """
    n_items = len(world.concepts) if n_items is None else n_items
    if n_items < 1:
        raise ConfigError(f"n_items must be positive, got {n_items}")
    text_encoder = world.text_encoder()
    mm_encoder = world.multimodal_encoder()
    describer = world.describer()

    item_ids, captions, query_ids, query_texts, truth = [], [], [], [], {}
    for index in range(n_items):
        concept = world.concepts[index % len(world.concepts)]
        ref = f"{prefix}/{index:04d}"
        world.register_image(ref, concept)
        caption = describer.describe_scene(ref)
        item_ids.append(ref)
        captions.append(caption)
        query_ids.append(f"q{index:04d}")
        query_texts.append(f"a photo of the {concept}, {caption.split()[1]}")
        truth[query_ids[-1]] = ref

    return BenchmarkInstance(
        query_ids = tuple(query_ids),
        query_texts = tuple(query_texts),
        item_ids = tuple(item_ids),
        image_embeddings = tuple(mm_encoder.encode_image_ref(ref) for ref in item_ids),
        caption_embeddings = tuple(text_encoder.encode_text(captions)),
        truth = truth,
    )
