import itertools
import math

import numpy as np
import pytest

from selmem.common import *
from selmem.config import BurninConfig
from selmem.core import as_matrix, cosine_distance
from selmem.perception import burnin_novelty, novelty_score
from selmem.type import FIRST_SCENE

from .conftest import emb

def test_copy_in_history():
    current = emb(0.2, 0.4, 0.9)
    assert novelty_score(current, [emb(1, 0, 0), emb(0.2, 0.4, 0.9)]) == 0.0

def test_minimum_distance():
    current = emb(1 / math.sqrt(2), 1 / math.sqrt(2))
    assert novelty_score(current, [emb(1, 0), emb(0, 1)]) == pytest.approx(1 - 1 / math.sqrt(2), abs = 1e-6)

def test_empty_history():
    assert novelty_score(emb(1, 0), []) is FIRST_SCENE
    assert novelty_score(emb(1, 0), np.empty((0, 2))) is FIRST_SCENE

def test_accepts_matrix():
    history = [emb(1, 0), emb(-1, 0)]
    assert novelty_score(emb(0, 1), as_matrix(history)) == pytest.approx(1.0)

def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        novelty_score(emb(1, 0), [emb(1, 0, 0)])

class TestBurnin:
    def test_identical_embeddings(self):
        scores = burnin_novelty([emb(1, 2, 3)] * 8, BurninConfig(burn_in_k = 2, repeats = 20))
        assert scores and all(v == 0.0 for v in scores.values())

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        embeddings = [emb(*rng.standard_normal(4)) for _ in range(12)]
        cfg = BurninConfig(burn_in_k = 3, repeats = 50, seed = 11)
        assert burnin_novelty(embeddings, cfg) == burnin_novelty(embeddings, cfg)

    def test_needs_more_images_than_burn_in(self):
        with pytest.raises(ConfigError):
            burnin_novelty([emb(1, 0)] * 3, BurninConfig(burn_in_k = 3, repeats = 1))

    def test_matches_exhaustive_expectation(self):
        # Two orthogonal images, each present twice
        embeddings = [emb(1, 0), emb(1, 0), emb(0, 1), emb(0, 1)]
        n = len(embeddings)
        totals, counts = np.zeros(n), np.zeros(n)
        for order in itertools.permutations(range(n)):
            for position in range(1, n):
                image = order[position]
                totals[image] += min(cosine_distance(embeddings[image], embeddings[j]) for j in order[:position])
                counts[image] += 1
        expected = totals / counts

        repeats = 4000
        scores = burnin_novelty(embeddings, BurninConfig(burn_in_k = 1, repeats = repeats, seed = 5))
        # Per-run scores are 0 or 1 and each image is scored in about 3 of 4 runs
        for image in range(n):
            assert abs(scores[image] - expected[image]) < 0.05
