"""User identification by name and face similarity.

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
import datetime
import logging

from typing import Optional, Tuple

import Levenshtein

from ..common import *
from ..core import Embedding, cosine_similarity
from ..store import MemoryStore
from .type import *

logger = logging.getLogger(__name__)

# Name ratio above which a name alone identifies the user
NAME_CONFIRM_RATIO = 0.8

# Lowest name ratio that asks the user to confirm
NAME_CLARIFY_RATIO = 0.6

# Face cosine similarity at which a face alone identifies the user
FACE_MATCH_SIMILARITY = 0.5

def levenshtein_ratio(a: str, b: str) -> float:
    """(|a| + |b| - d) / (|a| + |b|) with d the edit distance of the trimmed, case-folded strings.

    Two empty strings have ratio 1.
    """
    a = a.strip().casefold()
    b = b.strip().casefold()
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return (total - Levenshtein.distance(a, b)) / total

def best_name_match(name: str, store: MemoryStore) -> Tuple[Optional[str], float]:
    """User with the highest name ratio (lowest user id on ties) and that ratio."""
    best_id, best_ratio = None, -1.0
    for profile in store.list_users():
        if not profile.display_name:
            continue
        ratio = levenshtein_ratio(name, profile.display_name)
        if ratio > best_ratio:
            best_id, best_ratio = profile.user_id, ratio
    return best_id, max(best_ratio, 0.0)

def best_face_match(face: Embedding, store: MemoryStore) -> Tuple[Optional[str], float]:
    """User with the most similar face embedding (lowest user id on ties) and that similarity."""
    best_id, best_similarity = None, -2.0
    for profile in store.list_users():
        if profile.face_embedding is None:
            continue
        similarity = cosine_similarity(face, profile.face_embedding)
        if similarity > best_similarity:
            best_id, best_similarity = profile.user_id, similarity
    return best_id, best_similarity

def identify_user(name: Optional[str], face: Optional[Embedding], store: MemoryStore,
                  today: Optional[datetime.date] = None) -> IdentityDecision:
    """Match a name and/or a face against the known users.

    A name ratio above 0.8 or a face similarity of at least 0.5 identifies the
    user; if both fire for different users, the name wins. A best name ratio
    in [0.6, 0.8] without a face match asks for clarification. Otherwise a new
    profile is created.

    Raises:
        SchemaError: Neither name nor face given.
        DimensionError: The face embedding doesn't match the stored ones.
    """
    if name is not None and not name.strip():
        name = None
    if name is None and face is None:
        raise SchemaError("Identification needs a name or a face")

    name_id, ratio = best_name_match(name, store) if name is not None else (None, 0.0)
    face_id, similarity = best_face_match(face, store) if face is not None else (None, -1.0)
    name_hit = name_id is not None and ratio > NAME_CONFIRM_RATIO
    face_hit = face_id is not None and similarity >= FACE_MATCH_SIMILARITY

    if name_hit and face_hit and name_id == face_id:
        decision = Identified(name_id, MatchedBy.BOTH, ratio, similarity)
    elif name_hit:
        if face_hit:
            logger.warning("Name matches %s but face matches %s, trusting the name", name_id, face_id)
        decision = Identified(name_id, MatchedBy.NAME, ratio, similarity if face_id == name_id else None)
    elif face_hit:
        decision = Identified(face_id, MatchedBy.FACE, ratio if name_id == face_id else None, similarity)
    elif name_id is not None and NAME_CLARIFY_RATIO <= ratio <= NAME_CONFIRM_RATIO:
        decision = NeedsClarification(name_id, ratio)
    else:
        profile = store.add_user(display_name = name or "", face_embedding = face, day = today)
        decision = NewUser(profile.user_id)

    logger.info("Identification: %s", decision)
    return decision
