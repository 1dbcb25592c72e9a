"""Encoder interfaces.

Anything providing these methods can be plugged into capture and retrieval;
the package ships a deterministic synthetic implementation and a client of a
remote embedding service.

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

from dataclasses import dataclass
from typing import List, Protocol, Sequence, runtime_checkable

from ..common import *
from ..core import Embedding
from ..type import EmotionVector

class EncoderKind(enum.Enum):
    """Embedding space of an encoder."""

    # Text only (episodes, captions, queries)
    TEXT       = "text"

    # Joint image/text space (scenes, queries)
    MULTIMODAL = "multimodal"

@dataclass(frozen=True)
class EncoderDescriptor:
    kind: EncoderKind
    dim: int
    identifier: str

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ConfigError(f"Encoder dimension must be positive, got {self.dim}")

    def check(self, embedding: Embedding) -> Embedding:
        """Return `embedding` if it has the encoder's dimension."""
        if embedding.dim != self.dim:
            raise DimensionError(f"{self.identifier} emitted dimension {embedding.dim}, expected {self.dim}")
        return embedding

@runtime_checkable
class TextEncoder(Protocol):
    descriptor: EncoderDescriptor

    def encode_text(self, texts: Sequence[str]) -> List[Embedding]:
        """One embedding per text. Raises SchemaError on an empty batch."""
        ...

@runtime_checkable
class MultimodalEncoder(Protocol):
    descriptor: EncoderDescriptor

    def encode_query_multimodal(self, text: str) -> Embedding:
        ...

    def encode_image_ref(self, ref: str) -> Embedding:
        """Embedding of the image behind `ref`. Raises UnknownRefError if unresolvable."""
        ...

@runtime_checkable
class SceneDescriber(Protocol):
    def describe_scene(self, image_ref: str) -> str:
        """Short non-empty caption. Raises DescriberError if the image can't be described."""
        ...

@runtime_checkable
class EmotionDetector(Protocol):
    def detect_emotions(self, frame_ref: str) -> EmotionVector:
        """Emotion probabilities of the face in the frame. Raises DetectorError."""
        ...

def check_batch(texts: Sequence[str]) -> List[str]:
    texts = list(texts)
    if not texts:
        raise SchemaError("Cannot encode an empty batch")
    for text in texts:
        if not isinstance(text, str):
            raise SchemaError(f"Expected text, got {type(text).__name__}")
    return texts
