import pytest

from hypothesis import given
from hypothesis import strategies as st

from selmem.common import *
from selmem.config import SyntheticWorldConfig
from selmem.encoders import SyntheticWorld
from selmem.eval import BenchmarkInstance, alpha_sweep, make_benchmark, recall_at_k

from .conftest import emb

def ranked_at(position, truth_item="t", length=20):
    """A ranking with `truth_item` at the 1-based `position`."""
    others = [f"o{i}" for i in range(length - 1)]
    return others[:position - 1] + [truth_item] + others[position - 1:]

class TestRecallAtK:
    def test_all_first(self):
        rankings = {f"q{i}": ranked_at(1) for i in range(4)}
        truth = {q: "t" for q in rankings}
        assert recall_at_k(rankings, truth, 1) == 100.0

    def test_always_sixth(self):
        rankings = {f"q{i}": ranked_at(6) for i in range(4)}
        truth = {q: "t" for q in rankings}
        assert recall_at_k(rankings, truth, 5) == 0.0
        assert recall_at_k(rankings, truth, 10) == 100.0

    def test_hand_counted(self):
        positions = [1, 3, 7, 2, 11, 1, 5, 6, 20, 4]
        rankings = {f"q{i}": ranked_at(p) for i, p in enumerate(positions)}
        truth = {q: "t" for q in rankings}
        assert recall_at_k(rankings, truth, 1) == 20.0
        assert recall_at_k(rankings, truth, 5) == 60.0
        assert recall_at_k(rankings, truth, 10) == 80.0

    def test_errors(self):
        with pytest.raises(SchemaError):
            recall_at_k({"q": ["t"]}, {"other": "t"}, 1)
        with pytest.raises(SchemaError):
            recall_at_k({}, {}, 1)
        with pytest.raises(ConfigError):
            recall_at_k({"q": ["t"]}, {"q": "t"}, 0)

    @given(st.lists(st.integers(1, 20), min_size = 1, max_size = 15), st.integers(1, 19))
    def test_non_decreasing_in_k(self, positions, k):
        rankings = {f"q{i}": ranked_at(p) for i, p in enumerate(positions)}
        truth = {q: "t" for q in rankings}
        assert recall_at_k(rankings, truth, k) <= recall_at_k(rankings, truth, k + 1)

def test_instance_needs_ground_truth():
    with pytest.raises(SchemaError):
        BenchmarkInstance(query_ids = ("q",), query_texts = ("x",), item_ids = ("a",),
                          image_embeddings = (emb(1, 0),), caption_embeddings = (emb(0, 1),), truth = {})
    with pytest.raises(SchemaError):
        BenchmarkInstance(query_ids = ("q",), query_texts = ("x",), item_ids = ("a", "b"),
                          image_embeddings = (emb(1, 0),), caption_embeddings = (emb(0, 1),), truth = {"q": "a"})

@pytest.fixture(scope = "module")
def bench_world():
    return SyntheticWorld(SyntheticWorldConfig(seed = 7, dim = 64, concept_count = 20))

@pytest.fixture(scope = "module")
def instance(bench_world):
    return make_benchmark(bench_world, n_items = 60)

class TestMakeBenchmark:
    def test_layout(self, instance, bench_world):
        assert len(instance.item_ids) == len(instance.query_ids) == 60
        assert instance.truth["q0000"] == "bench/0000"
        assert instance.truth["q0059"] == "bench/0059"
        assert bench_world.concept_of("bench/0021") == bench_world.concepts[1]
        assert instance.query_texts[0].startswith(f"a photo of the {bench_world.concepts[0]}, ")

    def test_one_item_per_concept_by_default(self):
        world = SyntheticWorld(SyntheticWorldConfig(seed = 1, dim = 32, concept_count = 6))
        assert len(make_benchmark(world).item_ids) == 6

    def test_needs_items(self, world):
        with pytest.raises(ConfigError):
            make_benchmark(world, n_items = 0)

class TestAlphaSweep:
    @pytest.fixture(scope = "class")
    def sweep(self, bench_world, instance):
        return alpha_sweep(instance, bench_world.text_encoder(), bench_world.multimodal_encoder())

    def test_endpoints_equal_unimodal(self, sweep):
        assert sweep.fusion[0.0] == sweep.text
        assert sweep.fusion[1.0] == sweep.image

    def test_interior_fusion_at_least_as_good(self, sweep):
        best = max(sweep.fusion[a][1] for a in sweep.fusion if 0.0 < a < 1.0)
        assert best >= max(sweep.text[1], sweep.image[1])

    def test_recall_grows_with_k(self, sweep):
        for row in [sweep.text, sweep.image] + list(sweep.fusion.values()):
            assert row[1] <= row[5] <= row[10]

    def test_best_alpha_and_document(self, sweep):
        alpha, recall = sweep.best_alpha(1)
        assert recall == max(row[1] for row in sweep.fusion.values())
        document = sweep.to_dict()
        assert len(document["fusion"]) == 11
        assert document["best_alpha"]["1"] == alpha

    def test_minmax(self, bench_world, instance):
        sweep = alpha_sweep(instance, bench_world.text_encoder(), bench_world.multimodal_encoder(),
                            alphas = (0.0, 1.0), normalization = "minmax")
        assert sweep.fusion[0.0] == sweep.text
        assert sweep.fusion[1.0] == sweep.image

    def test_unknown_normalization(self, bench_world, instance):
        with pytest.raises(ConfigError):
            alpha_sweep(instance, bench_world.text_encoder(), bench_world.multimodal_encoder(),
                        normalization = "softmax")
