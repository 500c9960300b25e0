import numpy as np
import pytest
from scipy import stats as scipy_stats

from emlab.stats import rankdata_average, sem, spearman


class TestRanks:
    def test_plain(self):
        np.testing.assert_array_equal(rankdata_average([10, 30, 20]), [1, 3, 2])

    def test_ties_get_average_rank(self):
        np.testing.assert_array_equal(rankdata_average([1, 2, 2, 3]), [1, 2.5, 2.5, 4])
        np.testing.assert_array_equal(rankdata_average([5, 5, 5]), [2, 2, 2])


class TestSpearman:
    def test_perfect_monotone(self):
        r = spearman([1, 2, 3, 4], [10, 20, 30, 40])
        assert r.rho == pytest.approx(1.0)

    def test_perfect_reversal(self):
        r = spearman([1, 2, 3, 4], [4, 3, 2, 1])
        assert r.rho == pytest.approx(-1.0)

    def test_hand_computed_small_case(self):
        r = spearman([1, 2, 3], [2, 1, 3])
        assert r.rho == pytest.approx(0.5)

    def test_hand_computed_with_ties(self):
        # ranks x: 1 2 3 4 ; ranks y: 1.5 1.5 3 4 -> pearson by hand = 0.9487
        r = spearman([1, 2, 3, 4], [5, 5, 7, 9])
        assert r.rho == pytest.approx(3 / np.sqrt(10), abs=1e-12)

    def test_undefined_cases(self):
        assert spearman([1, 2], [3, 4]) is None          # n < 3
        assert spearman([1, 1, 1], [1, 2, 3]) is None    # constant series
        assert spearman([1, 2, 3], [7, 7, 7]) is None

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        xs = rng.normal(size=30)
        ys = rng.normal(size=30)
        assert spearman(xs, ys).rho == pytest.approx(spearman(ys, xs).rho)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        xs = rng.normal(size=25)
        ys = rng.normal(size=25)
        base = spearman(xs, ys).rho
        assert spearman(np.exp(xs), ys).rho == pytest.approx(base)
        assert spearman(xs, 3 * ys + 7).rho == pytest.approx(base)

    def test_agrees_with_scipy_incl_p(self):
        rng = np.random.default_rng(2)
        for n in (12, 40, 200):
            xs = rng.normal(size=n)
            ys = 0.5 * xs + rng.normal(size=n)
            mine = spearman(xs, ys)
            ref_rho, ref_p = scipy_stats.spearmanr(xs, ys)
            assert mine.rho == pytest.approx(ref_rho, abs=1e-12)
            assert mine.p_value == pytest.approx(ref_p, rel=1e-6)

    def test_agrees_with_scipy_under_ties(self):
        xs = [1, 2, 2, 3, 3, 3, 4, 5, 6, 6, 7, 8]
        ys = [2, 1, 3, 3, 5, 4, 4, 6, 8, 7, 7, 9]
        mine = spearman(xs, ys)
        ref_rho, _ = scipy_stats.spearmanr(xs, ys)
        assert mine.rho == pytest.approx(ref_rho, abs=1e-12)

    def test_small_n_permutation_p(self):
        # n=3, rho=1: permutations of y give rho {1, .5, .5, -.5, -.5, -1}
        r = spearman([1, 2, 3], [10, 20, 30])
        assert r.rho == pytest.approx(1.0)
        assert r.p_value == pytest.approx(2 / 6)

    def test_significance_flag(self):
        xs = np.arange(30.0)
        r = spearman(xs, xs)
        assert r.p_value == 0.0 and r.significant


class TestSem:
    def test_constant(self):
        assert sem([1, 1, 1]) == 0.0

    def test_two_points(self):
        assert sem([0, 2]) == pytest.approx(1.0)

    def test_scales_linearly(self):
        vals = np.array([1.0, 4.0, 2.0, 8.0])
        assert sem(5 * vals) == pytest.approx(5 * sem(vals))

    def test_undefined_below_two(self):
        assert sem([3.0]) is None
