"""Deterministic synthetic encoders.

The synthetic world is a set of concepts, each owning a random anchor
direction. An image of a concept embeds near the concept's anchor, perturbed
by image noise; a query naming a concept embeds near the same anchor,
perturbed by text noise. Text is embedded by summing per-token hash vectors,
so texts sharing words are similar. Every vector is derived from a keyed hash
of (seed, input), which makes all encoders bit-reproducible.

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
import hashlib
import itertools
import logging
import re

from typing import Dict, List, Optional, Sequence

import numpy as np

from ..common import *
from ..config import SyntheticWorldConfig
from ..core import Embedding
from ..type import EmotionVector
from .fixtures import FixtureAnnotations
from .type import EncoderDescriptor, EncoderKind, check_batch

logger = logging.getLogger(__name__)

TOKEN_PATTERN = re.compile(r"[\w-]+")

ADJECTIVES = ("sunny", "quiet", "busy", "rainy", "old", "green",
              "snowy", "crowded", "small", "bright", "dark", "windy")

NOUNS = ("park", "kitchen", "beach", "market", "garden", "street",
         "library", "station", "harbor", "forest", "cafe", "museum")

# Caption words that carry no concept information
MODIFIERS = ("wide", "calm", "colorful", "distant", "close", "blurry", "warm",
             "cold", "empty", "lively", "morning", "evening", "tilted", "framed")

# Probe images per concept used by the separability check
SEPARABILITY_SAMPLES = 8

def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)

def tokenize(text: str) -> List[str]:
    return TOKEN_PATTERN.findall(text.casefold())

class SyntheticWorld():
    """Concept anchors, synthetic images and planted annotations."""

    def __init__(self, cfg: SyntheticWorldConfig = SyntheticWorldConfig(),
                 annotations: Optional[FixtureAnnotations] = None) -> None:
        """Instantiate the class.

        Args:
            cfg:
                World parameters.
            annotations:
                Frame annotations. Annotated frames with a concept become images
                of that concept; their emotions feed the synthetic detector.

        Raises:
            ConfigError: More concepts requested than the vocabulary provides, or
                the images are not separable by concept under the configured noise.
        """
        self.cfg = cfg
        self.annotations = annotations if annotations is not None else FixtureAnnotations()

        pairs = [f"{a}-{n}" for a, n in itertools.product(ADJECTIVES, NOUNS)]
        if cfg.concept_count > len(pairs):
            raise ConfigError(f"The synthetic vocabulary has {len(pairs)} concepts, "
                              f"{cfg.concept_count} requested")
        rng = np.random.default_rng(self._key("concepts"))
        chosen = rng.choice(len(pairs), size = cfg.concept_count, replace = False)
        concepts = [pairs[i] for i in chosen]
        concepts.extend(c for c in self.annotations.concepts() if c not in concepts)
        self.concepts = tuple(concepts)
        # Queries recognize every vocabulary concept, sampled or not
        self._concept_set = frozenset(pairs) | frozenset(self.concepts)

        self._images: Dict[str, str] = {a.ref: a.concept for a in self.annotations if a.concept}
        self._anchors: Dict[str, np.ndarray] = {}
        self.check_separability()

    def _key(self, *parts: str) -> int:
        h = hashlib.blake2b(digest_size = 16)
        h.update(str(self.cfg.seed).encode("ascii"))
        for part in parts:
            h.update(b"\x00")
            h.update(part.encode("utf-8"))
        return int.from_bytes(h.digest(), "little")

    def direction(self, *parts: str) -> np.ndarray:
        """Unit vector keyed by (seed, parts)."""
        rng = np.random.default_rng(self._key(*parts))
        return _unit(rng.standard_normal(self.cfg.dim))

    def anchor(self, concept: str) -> np.ndarray:
        anchor = self._anchors.get(concept)
        if anchor is None:
            anchor = self._anchors[concept] = self.direction("anchor", concept)
        return anchor

    def register_image(self, ref: str, concept: str) -> None:
        """Declare `ref` to be an image of `concept`."""
        known = self._images.get(ref)
        if known is not None and known != concept:
            raise SchemaError(f"Image {ref!r} is already an image of {known!r}")
        self._images[ref] = concept

    def concept_of(self, ref: str) -> str:
        try:
            return self._images[ref]
        except KeyError:
            raise UnknownRefError(f"Unknown image reference {ref!r}") from None

    def embed_text(self, text: str) -> Embedding:
        tokens = tokenize(text)
        if tokens:
            base = _unit(np.sum([self.direction("token", t) for t in tokens], axis = 0))
        else:
            base = self.direction("text", text)
        return Embedding(_unit(base + self.cfg.text_noise * self.direction("text-noise", text)))

    def embed_query_multimodal(self, text: str) -> Embedding:
        tokens = tokenize(text)
        labels = [t for t in dict.fromkeys(tokens) if t in self._concept_set]
        if labels:
            base = _unit(np.sum([self.anchor(c) for c in labels], axis = 0))
        elif tokens:
            base = _unit(np.sum([self.direction("mm-token", t) for t in tokens], axis = 0))
        else:
            base = self.direction("mm-text", text)
        return Embedding(_unit(base + self.cfg.text_noise * self.direction("query-noise", text)))

    def embed_image(self, ref: str) -> Embedding:
        concept = self.concept_of(ref)
        return Embedding(self._image_vector(concept, ref))

    def _image_vector(self, concept: str, ref: str) -> np.ndarray:
        return _unit(self.anchor(concept) + self.cfg.image_noise * self.direction("image-noise", ref))

    def caption(self, ref: str) -> str:
        """The concept label followed by two seed-stable modifier words."""
        try:
            concept = self.concept_of(ref)
        except UnknownRefError as e:
            raise DescriberError(str(e)) from None
        rng = np.random.default_rng(self._key("caption", ref))
        modifiers = rng.choice(len(MODIFIERS), size = 2, replace = False)
        return " ".join([concept] + [MODIFIERS[i] for i in modifiers])

    def emotions(self, ref: str) -> EmotionVector:
        annotation = self.annotations.get(ref)
        if annotation is None:
            raise DetectorError(f"No annotation for frame {ref!r}")
        return annotation.emotions if annotation.emotions is not None else EmotionVector.zeros()

    def separability(self, samples: int = SEPARABILITY_SAMPLES) -> float:
        """Mean same-concept minus mean cross-concept cosine similarity of probe images."""
        rows = [self._image_vector(c, f"probe/{c}/{i}") for c in self.concepts for i in range(samples)]
        sims = np.vstack(rows) @ np.vstack(rows).T
        labels = np.repeat(np.arange(len(self.concepts)), samples)
        same = labels[:, None] == labels[None, :]
        np.fill_diagonal(same, False)
        different = labels[:, None] != labels[None, :]
        return float(sims[same].mean() - sims[different].mean())

    def check_separability(self) -> None:
        gap = self.separability()
        logger.debug("Synthetic world seed %d: separability %.4f", self.cfg.seed, gap)
        if gap < self.cfg.separability_margin:
            raise ConfigError(f"Synthetic images are not separable by concept: gap {gap:.4f} "
                              f"< margin {self.cfg.separability_margin} (lower image_noise)")

    def text_encoder(self) -> "SyntheticTextEncoder":
        return SyntheticTextEncoder(self)

    def multimodal_encoder(self) -> "SyntheticMultimodalEncoder":
        return SyntheticMultimodalEncoder(self)

    def describer(self) -> "SyntheticDescriber":
        return SyntheticDescriber(self)

    def detector(self) -> "SyntheticEmotionDetector":
        return SyntheticEmotionDetector(self)

class SyntheticTextEncoder():
    def __init__(self, world: SyntheticWorld) -> None:
        self.world = world
        self.descriptor = EncoderDescriptor(EncoderKind.TEXT, world.cfg.dim, f"synthetic-text:{world.cfg.seed}")

    def encode_text(self, texts: Sequence[str]) -> List[Embedding]:
        return [self.world.embed_text(t) for t in check_batch(texts)]

class SyntheticMultimodalEncoder():
    def __init__(self, world: SyntheticWorld) -> None:
        self.world = world
        self.descriptor = EncoderDescriptor(EncoderKind.MULTIMODAL, world.cfg.dim,
                                            f"synthetic-mm:{world.cfg.seed}")

    def encode_query_multimodal(self, text: str) -> Embedding:
        return self.world.embed_query_multimodal(text)

    def encode_image_ref(self, ref: str) -> Embedding:
        return self.world.embed_image(ref)

class SyntheticDescriber():
    def __init__(self, world: SyntheticWorld) -> None:
        self.world = world

    def describe_scene(self, image_ref: str) -> str:
        return self.world.caption(image_ref)

class SyntheticEmotionDetector():
    """Reports the planted emotions of annotated frames."""

    def __init__(self, world: SyntheticWorld) -> None:
        self.world = world

    def detect_emotions(self, frame_ref: str) -> EmotionVector:
        return self.world.emotions(frame_ref)
