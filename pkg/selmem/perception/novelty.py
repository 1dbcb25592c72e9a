"""Scene novelty: distance of a scene to the closest previously stored scene.

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
from typing import Dict, Sequence, Union

import numpy as np

from ..common import *
from ..config import BurninConfig
from ..core import Embedding, as_matrix, cosine_distances, pairwise_cosine_distances
from ..type import FIRST_SCENE, Novelty
from ..utils import spawn_generators

def novelty_score(current: Embedding, history: Union[Sequence[Embedding], np.ndarray]) -> Novelty:
    """Minimum cosine distance between `current` and every history scene.

    Args:
        current:
            Embedding of the scene being evaluated.
        history:
            Previously stored scene embeddings, either as Embedding objects or
            as a float64 matrix with one embedding per row.

    Returns:
        The novelty in [0, 2], or FIRST_SCENE if the history is empty.

    Raises:
        DimensionError: The history and `current` dimensions differ.
    """
    matrix = history if isinstance(history, np.ndarray) else as_matrix(history)
    if matrix.shape[0] == 0:
        return FIRST_SCENE
    return float(cosine_distances(current, matrix).min())

def burnin_novelty(embeddings: Sequence[Embedding], cfg: BurninConfig) -> Dict[int, float]:
    """Novelty of every image averaged over repeated shuffled runs.

    In each run the images are shuffled, the first `burn_in_k` images of the
    run are not scored (but still serve as history), and every later image is
    scored by its minimum cosine distance to all images preceding it in that
    run. Run `r` draws its permutation from the r-th stream split off
    `cfg.seed`.

    Args:
        embeddings:
            The image embeddings; indices of the result refer to this sequence.
        cfg:
            Burn-in parameters.

    Returns:
        Mapping of image index to its mean novelty over the runs where it was
        scored. Images never scored are absent.

    Raises:
        ConfigError: There are not more images than `burn_in_k`.
    """
    n = len(embeddings)
    if n < cfg.burn_in_k + 1:
        raise ConfigError(f"Burn-in of {cfg.burn_in_k} needs at least {cfg.burn_in_k + 1} images, got {n}")

    distances = pairwise_cosine_distances(as_matrix(embeddings))
    totals = np.zeros(n, dtype = np.float64)
    counts = np.zeros(n, dtype = np.int64)

    # Mask of the strictly-preceding positions of each position in a run
    preceding = np.tril(np.ones((n, n), dtype = bool), k = -1)

    for rng in spawn_generators(cfg.seed, cfg.repeats):
        order = rng.permutation(n)
        in_run = np.where(preceding, distances[np.ix_(order, order)], np.inf)
        scores = in_run.min(axis = 1)
        scored = order[cfg.burn_in_k:]
        totals[scored] += scores[cfg.burn_in_k:]
        counts[scored] += 1

    return {int(i): float(totals[i] / counts[i]) for i in range(n) if counts[i] > 0}
