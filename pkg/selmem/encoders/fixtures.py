"""Frame annotation files.

One JSON object per line:

    {"ref": "frames/0001.jpg", "concept": "sunny-park", "emotions": {"happy": 0.9}}

`emotions` may list a subset of the categories (the others are 0) or be
omitted/null for frames without a detected face.

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
import json
import logging

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Iterator, Mapping, Optional, Union

from ..common import *
from ..type import EMOTIONS, Emotion, EmotionVector

logger = logging.getLogger(__name__)

@dataclass(frozen=True)
class FrameAnnotation:
    ref: str
    concept: Optional[str] = None
    emotions: Optional[EmotionVector] = None

def parse_emotions(raw: Optional[Mapping]) -> Optional[EmotionVector]:
    """Complete a partial {category: probability} mapping with zeros."""
    if raw is None:
        return None
    if not isinstance(raw, Mapping):
        raise SchemaError(f"emotions must be a mapping, got {type(raw).__name__}")
    values = {e: 0.0 for e in EMOTIONS}
    for key, value in raw.items():
        try:
            values[Emotion(str(key).lower())] = float(value)
        except ValueError:
            raise SchemaError(f"Unknown emotion category or value: {key}={value!r}") from None
    return EmotionVector(values)

class FixtureAnnotations():
    """Planted ground truth of a set of frames, keyed by frame reference."""

    def __init__(self, annotations: Iterable[FrameAnnotation] = ()) -> None:
        self._annotations: Dict[str, FrameAnnotation] = {}
        for annotation in annotations:
            self.add(annotation)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "FixtureAnnotations":
        """Read an annotation file.

        Raises:
            SchemaError: A line is malformed; the message names file and line.
        """
        path = Path(path)
        fixtures = cls()
        with open(path, encoding = "utf-8") as f:
            for line_no, line in enumerate(f, start = 1):
                if not line.strip():
                    continue
                try:
                    fixtures.add(annotation_from_dict(json.loads(line)))
                except (ValueError, TypeError, KeyError) as e:
                    raise SchemaError(f"{path}:{line_no}: {e}") from None
        logger.debug("Loaded %d frame annotations from %s", len(fixtures), path)
        return fixtures

    def add(self, annotation: FrameAnnotation) -> None:
        if annotation.ref in self._annotations and self._annotations[annotation.ref] != annotation:
            raise SchemaError(f"Conflicting annotations for frame {annotation.ref!r}")
        self._annotations[annotation.ref] = annotation

    def get(self, ref: str) -> Optional[FrameAnnotation]:
        return self._annotations.get(ref)

    def concepts(self) -> list:
        """Distinct annotated concepts, in first-seen order."""
        return list(dict.fromkeys(a.concept for a in self._annotations.values() if a.concept))

    def __contains__(self, ref: object) -> bool:
        return ref in self._annotations

    def __iter__(self) -> Iterator[FrameAnnotation]:
        return iter(self._annotations.values())

    def __len__(self) -> int:
        return len(self._annotations)

def annotation_from_dict(data: Mapping) -> FrameAnnotation:
    if not isinstance(data, Mapping):
        raise SchemaError("Annotation must be a JSON object")
    ref = data.get("ref")
    if not isinstance(ref, str) or not ref:
        raise SchemaError("Annotation needs a non-empty 'ref'")
    concept = data.get("concept")
    if concept is not None and (not isinstance(concept, str) or not concept):
        raise SchemaError("'concept' must be a non-empty string")
    return FrameAnnotation(ref = ref, concept = concept, emotions = parse_emotions(data.get("emotions")))
