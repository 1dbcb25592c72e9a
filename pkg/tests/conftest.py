"""Shared fixtures of the test-suite."""
import numpy as np
import pytest

from selmem.config import SyntheticWorldConfig
from selmem.core import Embedding
from selmem.encoders import SyntheticWorld
from selmem.store import MemoryStore, UserProfile
from selmem.type import EMOTIONS, EmotionVector

USER = "251008_0001"
OTHER_USER = "251008_0002"

def emb(*values) -> Embedding:
    return Embedding(np.array(values, dtype = np.float64))

def emotions(**probabilities) -> EmotionVector:
    values = {e: 0.0 for e in EMOTIONS}
    values.update({e: probabilities[e.value] for e in EMOTIONS if e.value in probabilities})
    return EmotionVector(values)

def random_embedding(rng: np.random.Generator, dim: int) -> Embedding:
    return Embedding(rng.standard_normal(dim))

@pytest.fixture
def store() -> MemoryStore:
    """Volatile store (text dim 4, multimodal dim 4) with one user."""
    memory = MemoryStore(4, 4)
    memory.put_user(UserProfile(USER, display_name = "Alice"))
    return memory

@pytest.fixture
def store_dir(tmp_path):
    return tmp_path / "memory.store"

@pytest.fixture
def world() -> SyntheticWorld:
    return SyntheticWorld(SyntheticWorldConfig(seed = 7, dim = 32, concept_count = 8))
