"""Human memorability ratings.

Ratings files are long-format CSV tables with the columns

    rater_id,image_id,rating

one row per (rater, image) pair, ratings on the 1-9 scale.

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
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from ..common import *
from .stats import spearman

logger = logging.getLogger(__name__)

RATING_MIN = 1
RATING_MAX = 9

RATINGS_COLUMNS = ("rater_id", "image_id", "rating")

class RatingsMatrix():
    """Complete raters x images grid of ratings."""

    def __init__(self, values, rater_ids: Sequence[str], image_ids: Sequence[str]) -> None:
        values = np.array(values, dtype = np.float64)
        if values.ndim != 2 or values.shape != (len(rater_ids), len(image_ids)):
            raise SchemaError(f"Ratings of shape {values.shape} don't match "
                              f"{len(rater_ids)} raters x {len(image_ids)} images")
        if np.isnan(values).any():
            raise SchemaError("Ratings matrix has missing cells")
        if np.any(values < RATING_MIN) or np.any(values > RATING_MAX):
            raise SchemaError(f"Ratings must be in [{RATING_MIN}, {RATING_MAX}]")
        if len(set(rater_ids)) != len(rater_ids) or len(set(image_ids)) != len(image_ids):
            raise SchemaError("Rater and image ids must be unique")
        values.setflags(write = False)
        self.values = values
        self.rater_ids = [str(r) for r in rater_ids]
        self.image_ids = [str(i) for i in image_ids]

    @property
    def n_raters(self) -> int:
        return self.values.shape[0]

    @property
    def n_images(self) -> int:
        return self.values.shape[1]

    def mean_ratings(self) -> np.ndarray:
        """Per-image mean over all raters."""
        return self.values.mean(axis = 0)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "RatingsMatrix":
        missing = [c for c in RATINGS_COLUMNS if c not in frame.columns]
        if missing:
            raise SchemaError(f"Ratings table lacks columns: {', '.join(missing)}")
        frame = frame.astype({"rater_id": str, "image_id": str})
        frame["rating"] = pd.to_numeric(frame["rating"], errors = "coerce")
        if frame.duplicated(["rater_id", "image_id"]).any():
            raise SchemaError("Ratings table rates an image twice by the same rater")
        grid = frame.pivot(index = "rater_id", columns = "image_id", values = "rating")
        return cls(grid.to_numpy(dtype = np.float64), list(grid.index), list(grid.columns))

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "RatingsMatrix":
        try:
            frame = pd.read_csv(path)
        except (OSError, pd.errors.ParserError) as e:
            raise SchemaError(f"Unable to read ratings {path}: {e}") from None
        return cls.from_frame(frame)

    def to_frame(self) -> pd.DataFrame:
        raters, images = np.meshgrid(np.arange(self.n_raters), np.arange(self.n_images), indexing = "ij")
        return pd.DataFrame({
            "rater_id": np.array(self.rater_ids)[raters.ravel()],
            "image_id": np.array(self.image_ids)[images.ravel()],
            "rating": self.values.ravel(),
        })

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index = False)

@dataclass
class ConsistencyResult:
    mean_rho: float
    per_rater: Dict[str, float] = field(default_factory = dict)
    excluded: List[str] = field(default_factory = list)

    def to_dict(self) -> dict:
        return {"mean_rho": self.mean_rho, "per_rater": dict(self.per_rater), "excluded": list(self.excluded)}

def human_consistency(ratings: RatingsMatrix) -> ConsistencyResult:
    """Mean Spearman correlation of each rater with the mean of all other raters.

    Raters for whom the correlation is undefined (their own or the others'
    ratings are constant) are excluded and listed.

    Raises:
        DegenerateInputError: Fewer than 2 raters or 3 images, or every rater excluded.
    """
    if ratings.n_raters < 2 or ratings.n_images < 3:
        raise DegenerateInputError("Human consistency needs at least 2 raters and 3 images")
    total = ratings.values.sum(axis = 0)
    result = ConsistencyResult(mean_rho = 0.0)
    for r, rater in enumerate(ratings.rater_ids):
        own = ratings.values[r]
        others = (total - own) / (ratings.n_raters - 1)
        try:
            result.per_rater[rater] = spearman(own, others)
        except DegenerateInputError:
            result.excluded.append(rater)
    if not result.per_rater:
        raise DegenerateInputError("Every rater was excluded")
    if result.excluded:
        logger.warning("Excluded %d degenerate raters: %s", len(result.excluded), ", ".join(result.excluded))
    result.mean_rho = float(np.mean(list(result.per_rater.values())))
    return result
