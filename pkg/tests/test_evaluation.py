import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landensemble.errors import DataError
from landensemble.evaluation import (
    ConfusionMatrix,
    confusion_matrix,
    diversity_summary,
    kappa,
    overall_accuracy,
    pairwise_kappa,
    pearson_correlation,
    z_test,
)
from landensemble.io import ClassificationMap, ClassLegend

LEG2 = ClassLegend(("a", "b"))
LEG3 = ClassLegend(("a", "b", "c"))


def _kappa_oracle(counts):
    """Textbook kappa with float marginals."""
    counts = np.asarray(counts, float)
    n = counts.sum()
    p_o = np.trace(counts) / n
    p_e = sum(counts[i].sum() * counts[:, i].sum() for i in range(len(counts))) / n**2
    return (p_o - p_e) / (1 - p_e)


class TestConfusion:
    def test_perfect_is_diagonal(self):
        c = confusion_matrix([0, 1, 2, 2], [0, 1, 2, 2], 3)
        np.testing.assert_array_equal(c.counts, np.diag([1, 1, 2]))

    def test_half_wrong(self):
        c = confusion_matrix([0] * 10, [0] * 5 + [1] * 5, 2)
        np.testing.assert_array_equal(c.counts, [[5, 0], [5, 0]])

    def test_order_independent(self, rng):
        p, r = rng.integers(0, 4, 100), rng.integers(0, 4, 100)
        perm = rng.permutation(100)
        assert np.array_equal(confusion_matrix(p, r, 4).counts, confusion_matrix(p[perm], r[perm], 4).counts)

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            confusion_matrix([0, 1], [0], 2)

    def test_out_of_range(self):
        with pytest.raises(DataError):
            confusion_matrix([0, 2], [0, 1], 2)

    def test_empty_matrix(self):
        with pytest.raises(DataError):
            ConfusionMatrix(np.zeros((2, 2)))


class TestAccuracyKappa:
    def test_accuracy_examples(self):
        assert overall_accuracy(ConfusionMatrix([[45, 5], [5, 45]])) == pytest.approx(0.9)
        assert overall_accuracy(ConfusionMatrix(np.diag([3, 4]))) == 1.0
        assert overall_accuracy(ConfusionMatrix([[0, 3], [2, 0]])) == 0.0

    def test_kappa_examples(self):
        assert kappa(ConfusionMatrix([[45, 5], [5, 45]])) == pytest.approx(0.8, abs=1e-12)
        assert kappa(ConfusionMatrix([[30, 10], [20, 40]])) == pytest.approx(0.4, abs=1e-12)

    def test_perfect(self):
        assert kappa(ConfusionMatrix(np.diag([3, 5, 2]))) == 1.0

    def test_degenerate_marginals(self):
        assert kappa(ConfusionMatrix([[10, 0], [0, 0]])) == 1.0
        assert kappa(ConfusionMatrix([[0, 0], [0, 7]])) == 1.0

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(0, 50), min_size=9, max_size=9), st.permutations(range(3)))
    def test_oracle_and_permutation(self, flat, perm):
        counts = np.array(flat).reshape(3, 3)
        if counts.sum() == 0:
            return
        c = ConfusionMatrix(counts)
        rows = counts.sum(1)
        cols = counts.sum(0)
        if int(rows @ cols) == counts.sum() ** 2:
            return
        assert kappa(c) == pytest.approx(_kappa_oracle(counts), abs=1e-12)
        p = list(perm)
        assert kappa(ConfusionMatrix(counts[np.ix_(p, p)])) == pytest.approx(kappa(c), abs=1e-12)
        assert kappa(ConfusionMatrix(counts.T)) == kappa(c)


class TestPairwiseKappa:
    def test_identical(self, rng):
        m = ClassificationMap(rng.integers(0, 3, (5, 5)), LEG3)
        assert pairwise_kappa(m, m) == 1.0

    def test_symmetric_exactly(self, rng):
        for _ in range(20):
            a = ClassificationMap(rng.integers(0, 3, (7, 9)), LEG3)
            b = ClassificationMap(rng.integers(0, 3, (7, 9)), LEG3)
            assert pairwise_kappa(a, b) == pairwise_kappa(b, a)

    def test_hand_built_ten_pixels(self):
        a = np.array([[0, 0, 0, 0, 1], [1, 1, 1, 1, 1]])
        b = np.array([[0, 0, 0, 1, 1], [1, 1, 1, 0, 1]])
        # cross-tab by hand: a=0 -> b {0:3, 1:1}; a=1 -> b {0:1, 1:5}
        expected = kappa(ConfusionMatrix([[3, 1], [1, 5]]))
        p_o, p_e = 0.8, (4 * 4 + 6 * 6) / 100
        assert expected == pytest.approx((p_o - p_e) / (1 - p_e))
        assert pairwise_kappa(ClassificationMap(a, LEG2), ClassificationMap(b, LEG2)) == expected

    def test_mask(self):
        a = ClassificationMap(np.array([[0, 1, 0, 1]]), LEG2)
        b = ClassificationMap(np.array([[0, 1, 1, 0]]), LEG2)
        assert pairwise_kappa(a, b, mask=np.array([0, 1])) == 1.0

    def test_grid_mismatch(self):
        with pytest.raises(DataError):
            pairwise_kappa(ClassificationMap(np.zeros((2, 2), int), LEG2), ClassificationMap(np.zeros((2, 3), int), LEG2))


class TestDiversity:
    def test_ten_pairs_and_brute_force(self, rng):
        maps = [ClassificationMap(rng.integers(0, 3, (8, 8)), LEG3) for _ in range(5)]
        d = diversity_summary(maps)
        assert len(d.pairwise_kappas) == 10
        expected = [pairwise_kappa(maps[i], maps[j]) for i, j in itertools.combinations(range(5), 2)]
        assert list(d.pairwise_kappas) == expected
        mean = math.fsum(expected) / 10
        var = math.fsum((k - mean) ** 2 for k in expected) / 10
        assert d.mean == pytest.approx(mean, abs=1e-12)
        assert d.variance == pytest.approx(var, abs=1e-12)

    def test_identical(self, rng):
        m = ClassificationMap(rng.integers(0, 3, (5, 5)), LEG3)
        d = diversity_summary([m] * 5)
        assert d.mean == 1.0 and d.variance == 0.0

    def test_needs_two(self, rng):
        with pytest.raises(DataError):
            diversity_summary([ClassificationMap(np.zeros((2, 2), int), LEG2)])


class TestZTest:
    def test_equal(self):
        r = z_test(0.8, 100, 0.8, 200)
        assert r.z == 0.0 and not r.significant

    def test_hand_value(self):
        r = z_test(0.93, 1000, 0.89, 1000)
        expected = 0.04 / math.sqrt((0.93 * 0.07 + 0.89 * 0.11) / 1000)
        assert r.z == pytest.approx(expected, rel=1e-12)
        assert r.z == pytest.approx(3.13, abs=0.01) and r.significant

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 1), st.integers(1, 5000), st.floats(0, 1), st.integers(1, 5000))
    def test_antisymmetric(self, p1, n1, p2, n2):
        a, b = z_test(p1, n1, p2, n2), z_test(p2, n2, p1, n1)
        assert a.z == -b.z
        assert a.significant == b.significant == (abs(a.z) > 1.96)

    def test_zero_variance_sentinel(self):
        r = z_test(1.0, 50, 0.0, 50)
        assert r.z == math.inf and r.significant

    @pytest.mark.parametrize("args", [(0.5, 0, 0.5, 10), (1.2, 10, 0.5, 10)])
    def test_bad_input(self, args):
        with pytest.raises(DataError):
            z_test(*args)


class TestPearson:
    @pytest.mark.parametrize(
        "xs,ys,r", [([0, 1, 2], [0, 1, 2], 1.0), ([0, 1, 2], [2, 1, 0], -1.0), ([1, 2, 3], [2, 1, 3], 0.5)]
    )
    def test_examples(self, xs, ys, r):
        assert pearson_correlation(xs, ys) == pytest.approx(r, abs=1e-12)

    def test_affine(self, rng):
        for _ in range(50):
            x, y = rng.normal(size=10), rng.normal(size=10)
            r = pearson_correlation(x, y)
            a, b = rng.uniform(0.1, 10), rng.normal()
            assert pearson_correlation(a * x + b, y) == pytest.approx(r, abs=1e-10)
            assert pearson_correlation(x, -a * y + b) == pytest.approx(-r, abs=1e-10)

    def test_constant(self):
        with pytest.raises(DataError):
            pearson_correlation([1, 1, 1], [1, 2, 3])

    def test_too_short(self):
        with pytest.raises(DataError):
            pearson_correlation([1], [2])
