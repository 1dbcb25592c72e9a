import itertools
import math

import numpy as np
import pytest

from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as scipy_stats

from selmem.common import *
from selmem.eval import fisher_combined, significance_label, spearman, spearman_pvalue, spearman_test

def average_ranks(values):
    return [1 + sum(w < v for w in values) + (sum(w == v for w in values) - 1) / 2 for v in values]

def naive_spearman(xs, ys):
    rx, ry = average_ranks(xs), average_ranks(ys)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    return num / math.sqrt(sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry))

class TestSpearman:
    def test_identity_and_reversal(self):
        xs = [3.0, 1.0, 4.0, 1.5, 9.0]
        assert spearman(xs, xs) == 1.0
        assert spearman(xs, [-x for x in xs]) == -1.0

    def test_ties(self):
        assert spearman([1, 2, 2, 4], [1, 3, 2, 4]) == pytest.approx(naive_spearman([1, 2, 2, 4], [1, 3, 2, 4]))

    def test_all_four_element_sequences(self):
        sequences = [s for s in itertools.product((1, 2, 3), repeat = 4) if len(set(s)) > 1]
        for xs in sequences:
            for ys in sequences:
                assert spearman(xs, ys) == pytest.approx(naive_spearman(xs, ys), abs = 1e-12)

    @pytest.mark.parametrize("xs, ys", [
        ([1, 2], [1, 2]),
        ([1, 2, 3], [1, 2]),
        ([1, 1, 1], [1, 2, 3]),
        ([1, 2, 3], [5, 5, 5]),
    ])
    def test_degenerate(self, xs, ys):
        with pytest.raises(DegenerateInputError):
            spearman(xs, ys)

    @given(st.lists(st.integers(-20, 20), min_size = 3, max_size = 15).flatmap(
        lambda xs: st.tuples(st.just(xs), st.lists(st.integers(-20, 20), min_size = len(xs), max_size = len(xs)))))
    def test_monotone_transform_invariance(self, pair):
        xs, ys = pair
        if len(set(xs)) < 2 or len(set(ys)) < 2:
            return
        transformed = [math.exp(x / 4) for x in xs]
        assert spearman(transformed, [y ** 3 for y in ys]) == pytest.approx(spearman(xs, ys), abs = 1e-12)

class TestPValues:
    @pytest.mark.parametrize("n", [3, 4, 5, 6, 7])
    def test_exact_matches_enumeration(self, n):
        base = list(range(n))
        null = [naive_spearman(base, list(p)) for p in itertools.permutations(base)]
        distinct = {round(r, 9): r for r in null}
        for rho in [distinct[key] for key in sorted(distinct)][::2]:
            expected = sum(abs(r) >= abs(rho) - 1e-9 for r in null) / len(null)
            assert spearman_pvalue(rho, n) == pytest.approx(expected)

    def test_perfect_order(self):
        assert spearman_pvalue(1.0, 3) == pytest.approx(1 / 3)
        assert spearman_pvalue(1.0, 4) == pytest.approx(1 / 12)

    def test_t_approximation_matches_scipy(self):
        rng = np.random.default_rng(0)
        x, y = rng.standard_normal(25), rng.standard_normal(25)
        y = y + 0.5 * x
        rho, p = spearman_test(x, y)
        reference = scipy_stats.spearmanr(x, y)
        assert rho == pytest.approx(reference[0])
        assert p == pytest.approx(reference[1], rel = 1e-6)

    def test_perfect_correlation_is_not_zero(self):
        assert 0.0 < spearman_test(np.arange(30), np.arange(30))[1] < 1e-100

class TestFisher:
    def test_examples(self):
        assert fisher_combined([1.0, 1.0, 1.0]) == pytest.approx(1.0)
        assert fisher_combined([0.05]) == pytest.approx(0.05)
        x = -4 * math.log(0.05)
        closed_form = math.exp(-x / 2) * (1 + x / 2)
        assert fisher_combined([0.05, 0.05]) == pytest.approx(closed_form, rel = 1e-10)
        assert fisher_combined([0.05, 0.05]) == pytest.approx(0.01748, rel = 1e-3)

    def test_matches_scipy(self):
        p = [0.2, 0.01, 0.5, 0.33, 1e-5]
        assert fisher_combined(p) == pytest.approx(scipy_stats.combine_pvalues(p, method = "fisher")[1], rel = 1e-9)

    def test_tiny_pvalues(self):
        combined = fisher_combined([1e-80] * 3)
        assert 0.0 < combined < 1e-200

    @given(st.lists(st.floats(1e-12, 1.0), min_size = 1, max_size = 8), st.randoms())
    def test_permutation_invariant_and_monotone(self, p, random):
        shuffled = list(p)
        random.shuffle(shuffled)
        assert fisher_combined(shuffled) == pytest.approx(fisher_combined(p), rel = 1e-9)
        lowered = [p[0] / 2] + p[1:]
        assert fisher_combined(lowered) <= fisher_combined(p)

    @pytest.mark.parametrize("p", [[], [0.0], [0.5, 1.5], [float("nan")]])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            fisher_combined(p)

@pytest.mark.parametrize("p, label", [(1e-101, "**"), (1e-11, "*"), (1e-5, "ns"), (0.5, "ns")])
def test_significance_label(p, label):
    assert significance_label(p) == label
