"""Records kept by the memory store.

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
import re

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional

from ..common import *
from ..core import Embedding
from ..type import CaptureDecision

# Store format written by this version
FORMAT_VERSION = 1

# YYMMDD_NNNN, e.g. 251008_0001
USER_ID_PATTERN = re.compile(r"^\d{6}_\d{4}$")

def check_user_id(user_id: str) -> str:
    if not isinstance(user_id, str) or not USER_ID_PATTERN.match(user_id):
        raise SchemaError(f"User id must match YYMMDD_NNNN, got {user_id!r}")
    return user_id

@dataclass(frozen=True)
class SceneMemory:
    """A captured scene: image embedding, caption, caption embedding and gate diagnostics.

    `id` is None until the store assigns one.
    """
    user_id: str
    timestamp: int
    scene_embedding: Embedding
    capture: CaptureDecision
    caption: str = ""
    caption_embedding: Optional[Embedding] = None
    image_ref: Optional[str] = None
    id: Optional[int] = None

    def __post_init__(self) -> None:
        check_user_id(self.user_id)
        if self.timestamp < 0:
            raise SchemaError(f"Timestamp must be non-negative, got {self.timestamp}")
        if bool(self.caption) != (self.caption_embedding is not None):
            raise SchemaError("A caption embedding is present if and only if the caption is non-empty")

@dataclass(frozen=True)
class EpisodeMemory:
    """A conversation transcript with its text embedding."""
    user_id: str
    timestamp: int
    transcript: str
    text_embedding: Embedding
    id: Optional[int] = None

    def __post_init__(self) -> None:
        check_user_id(self.user_id)
        if self.timestamp < 0:
            raise SchemaError(f"Timestamp must be non-negative, got {self.timestamp}")
        if not self.transcript:
            raise SchemaError("Episode transcript must not be empty")

@dataclass(frozen=True)
class UserProfile:
    """A known user. Owns the user's scenes and episodes."""
    user_id: str
    display_name: str = ""
    face_embedding: Optional[Embedding] = None
    profile_facts: Mapping[str, str] = field(default_factory = dict)

    def __post_init__(self) -> None:
        check_user_id(self.user_id)
        object.__setattr__(self, "profile_facts", MappingProxyType(dict(self.profile_facts)))

@dataclass(frozen=True)
class StoreManifest:
    format_version: int
    embedding_dim_text: int
    embedding_dim_mm: int
    user_count: int = 0
    scene_count: int = 0
    episode_count: int = 0

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "embedding_dim_text": self.embedding_dim_text,
            "embedding_dim_mm": self.embedding_dim_mm,
            "counts": {
                "users": self.user_count,
                "scenes": self.scene_count,
                "episodes": self.episode_count,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StoreManifest":
        counts = data.get("counts", {})
        return cls(
            format_version = int(data["format_version"]),
            embedding_dim_text = int(data["embedding_dim_text"]),
            embedding_dim_mm = int(data["embedding_dim_mm"]),
            user_count = int(counts.get("users", 0)),
            scene_count = int(counts.get("scenes", 0)),
            episode_count = int(counts.get("episodes", 0)),
        )
