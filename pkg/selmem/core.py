"""Numeric primitives shared by every other module.

Embeddings are kept as 32-bit floats (the width they are persisted at) while
all similarity math is carried out in 64-bit floats.

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
from typing import Iterable, Sequence, Union

import numpy as np

from .common import *

# Default epsilon of the z-score normalization
DEFAULT_EPSILON = 1e-8

# Cosine distances below this value are reported as exactly 0
_DISTANCE_SNAP = 1e-12

class Embedding():
    """Fixed-dimension, finite, non-zero real vector."""

    __slots__ = ("_values",)

    def __init__(self, values: Union[Sequence[float], np.ndarray]) -> None:
        """Instantiate the class.

        Args:
            values:
                The vector components. Stored as little-endian 32-bit floats.

        Raises:
            DimensionError: The vector is not one-dimensional or is empty.
            DegenerateVectorError: A component is not finite, or all are zero.
        """
        array = np.array(values, dtype = "<f4")
        if array.ndim != 1 or array.size == 0:
            raise DimensionError(f"Embedding must be a non-empty 1-D vector, got shape {array.shape}")
        if not np.all(np.isfinite(array)):
            raise DegenerateVectorError("Embedding contains NaN or infinite values")
        if not np.any(array):
            raise DegenerateVectorError("Embedding is the zero vector")
        array.setflags(write = False)
        self._values = array

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Embedding":
        """Rebuild an embedding from its little-endian float32 encoding."""
        return cls(np.frombuffer(raw, dtype = "<f4"))

    @property
    def values(self) -> np.ndarray:
        """Read-only float32 components."""
        return self._values

    @property
    def dim(self) -> int:
        return int(self._values.size)

    def as_float64(self) -> np.ndarray:
        return self._values.astype(np.float64)

    def to_bytes(self) -> bytes:
        return self._values.tobytes()

    def __len__(self) -> int:
        return self.dim

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Embedding):
            return NotImplemented
        return self.to_bytes() == other.to_bytes()

    def __hash__(self) -> int:
        return hash(self.to_bytes())

    def __repr__(self) -> str:
        head = ", ".join(f"{v:.4g}" for v in self._values[:4])
        tail = ", ..." if self.dim > 4 else ""
        return f"Embedding(dim={self.dim}, [{head}{tail}])"

def as_matrix(embeddings: Iterable[Embedding]) -> np.ndarray:
    """Stack embeddings into a float64 matrix (one row per embedding).

    Raises:
        DimensionError: The embeddings don't share a single dimension.
    """
    rows = [e.values for e in embeddings]
    if not rows:
        return np.empty((0, 0), dtype = np.float64)
    dims = {row.size for row in rows}
    if len(dims) != 1:
        raise DimensionError(f"Embeddings have mixed dimensions: {sorted(dims)}")
    return np.vstack(rows).astype(np.float64)

def _check_pair(a: Embedding, b: Embedding) -> None:
    if a.dim != b.dim:
        raise DimensionError(f"Dimension mismatch: {a.dim} != {b.dim}")

def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """Cosine of the angle between two embeddings, in [-1, 1].

    Raises:
        DimensionError: The embeddings have different dimensions.
    """
    _check_pair(a, b)
    va = a.as_float64()
    vb = b.as_float64()
    value = float(np.dot(va, vb) / (np.linalg.norm(va) * np.linalg.norm(vb)))
    return min(1.0, max(-1.0, value))

def cosine_distance(a: Embedding, b: Embedding) -> float:
    """1 - cosine similarity, in [0, 2]."""
    distance = 1.0 - cosine_similarity(a, b)
    return 0.0 if distance < _DISTANCE_SNAP else distance

def cosine_similarities(query: Embedding, matrix: np.ndarray) -> np.ndarray:
    """Cosine similarity of `query` against every row of `matrix`.

    Args:
        query:
            The query embedding.
        matrix:
            float64 matrix with one (non-zero) embedding per row.

    Returns:
        float64 vector with one similarity per row.
    """
    if matrix.shape[0] == 0:
        return np.empty(0, dtype = np.float64)
    if matrix.shape[1] != query.dim:
        raise DimensionError(f"Dimension mismatch: {query.dim} != {matrix.shape[1]}")
    q = query.as_float64()
    sims = (matrix @ q) / (np.linalg.norm(matrix, axis = 1) * np.linalg.norm(q))
    return np.clip(sims, -1.0, 1.0)

def cosine_distances(query: Embedding, matrix: np.ndarray) -> np.ndarray:
    """Vectorized `cosine_distance` against every row of `matrix`."""
    distances = 1.0 - cosine_similarities(query, matrix)
    distances[distances < _DISTANCE_SNAP] = 0.0
    return distances

def pairwise_cosine_distances(matrix: np.ndarray) -> np.ndarray:
    """Square matrix of cosine distances between all rows of `matrix`."""
    unit = matrix / np.linalg.norm(matrix, axis = 1, keepdims = True)
    distances = 1.0 - np.clip(unit @ unit.T, -1.0, 1.0)
    distances[distances < _DISTANCE_SNAP] = 0.0
    return distances

def zscore_normalize(pool: Sequence[float], epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Map a pool of scores to (x - mean) / (std + epsilon).

    The standard deviation is the population one (no Bessel correction), so a
    pool with a single score maps to [0].

    Raises:
        EmptyPoolError: The pool is empty.
        ConfigError: epsilon is not positive.
    """
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    scores = np.asarray(pool, dtype = np.float64)
    if scores.size == 0:
        raise EmptyPoolError("Cannot normalize an empty pool")
    mean = scores.mean()
    std = np.sqrt(np.mean((scores - mean) ** 2))
    return (scores - mean) / (std + epsilon)

def min_max_normalize(pool: Sequence[float], epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Map a pool of scores to (x - min) / (max - min + epsilon)."""
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    scores = np.asarray(pool, dtype = np.float64)
    if scores.size == 0:
        raise EmptyPoolError("Cannot normalize an empty pool")
    low = scores.min()
    return (scores - low) / (scores.max() - low + epsilon)
