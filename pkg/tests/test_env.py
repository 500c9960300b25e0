import io

import numpy as np
import pytest

from emlab.env import (
    AttributeSpace,
    DataSplit,
    enumerate_inputs,
    one_hot,
    read_split_part,
    sample_with_density,
    split_inputs,
    split_unseen_combinations,
    write_split,
)
from emlab.errors import ConfigError, ResourceError, SplitError


class TestAttributeSpace:
    def test_sizes(self):
        assert AttributeSpace(2, 100).n_inputs == 10_000
        assert AttributeSpace(4, 4).n_inputs == 256

    def test_invalid(self):
        with pytest.raises(ConfigError):
            AttributeSpace(0, 4)
        with pytest.raises(ConfigError):
            AttributeSpace(2, 1)


class TestEnumerateInputs:
    def test_small_space_lexicographic(self):
        got = enumerate_inputs(AttributeSpace(2, 2))
        np.testing.assert_array_equal(got, [[0, 0], [0, 1], [1, 0], [1, 1]])

    def test_counts(self):
        assert len(enumerate_inputs(AttributeSpace(2, 100))) == 10_000
        assert len(enumerate_inputs(AttributeSpace(4, 4))) == 256

    def test_rows_unique_and_sorted(self):
        got = enumerate_inputs(AttributeSpace(3, 4))
        assert len(np.unique(got, axis=0)) == len(got)
        as_tuples = [tuple(r) for r in got]
        assert as_tuples == sorted(as_tuples)

    def test_cap(self):
        with pytest.raises(ResourceError):
            enumerate_inputs(AttributeSpace(8, 20))  # 2.56e10


class TestOneHot:
    def test_examples(self):
        space = AttributeSpace(2, 2)
        np.testing.assert_array_equal(one_hot(np.array([0, 0]), space), [1, 0, 1, 0])
        np.testing.assert_array_equal(one_hot(np.array([1, 0]), space), [0, 1, 1, 0])

    def test_sums_to_n_att(self):
        space = AttributeSpace(3, 5)
        inputs = enumerate_inputs(space)
        assert np.all(one_hot(inputs, space).sum(axis=1) == 3)

    def test_invalid_value(self):
        with pytest.raises(ValueError):
            one_hot(np.array([0, 2]), AttributeSpace(2, 2))


class TestSplit:
    def test_fraction_sizes(self):
        split = split_unseen_combinations(AttributeSpace(2, 100), 0.10, seed=1)
        assert len(split.test) == 1000
        assert len(split.train) == 9000

    def test_same_seed_same_split(self):
        a = split_unseen_combinations(AttributeSpace(2, 10), seed=7)
        b = split_unseen_combinations(AttributeSpace(2, 10), seed=7)
        np.testing.assert_array_equal(a.train, b.train)
        np.testing.assert_array_equal(a.test, b.test)

    def test_partition_of_the_space(self):
        space = AttributeSpace(3, 4)
        split = split_unseen_combinations(space, 0.10, seed=3)
        merged = np.concatenate([split.train, split.test])
        merged = merged[np.lexsort(merged.T[::-1])]
        np.testing.assert_array_equal(merged, enumerate_inputs(space))

    def test_every_value_in_train(self):
        space = AttributeSpace(2, 16)
        split = split_unseen_combinations(space, 0.10, seed=5)
        for a in range(space.n_att):
            assert set(split.train[:, a]) == set(range(space.n_val))

    def test_bad_fraction(self):
        with pytest.raises(ConfigError):
            split_unseen_combinations(AttributeSpace(2, 4), test_fraction=1.5)

    def test_unattainable_coverage_errors(self):
        # 2 inputs, half held out: train cannot cover both values
        with pytest.raises(SplitError):
            split_inputs(
                np.array([[0], [1]]), AttributeSpace(1, 2), test_fraction=0.5, seed=0
            )


class TestDensitySampler:
    def test_full_space(self):
        got = sample_with_density(100, 10_000, seed=0)
        assert len(got) == 10_000
        assert len(np.unique(got, axis=0)) == 10_000

    def test_partial_density(self):
        got = sample_with_density(140, 10_000, seed=1)
        assert len(got) == 10_000
        assert len(np.unique(got, axis=0)) == 10_000
        assert 10_000 / 140**2 == pytest.approx(0.51, abs=0.003)

    def test_diagonal_always_present(self):
        got = sample_with_density(200, 10_000, seed=2)
        rows = {tuple(r) for r in got}
        assert all((v, v) in rows for v in range(200))
        for col in (0, 1):
            assert set(got[:, col]) == set(range(200))

    def test_bounds(self):
        with pytest.raises(ValueError):
            sample_with_density(10, 5)
        with pytest.raises(ValueError):
            sample_with_density(10, 101)


def test_split_file_round_trip():
    space = AttributeSpace(2, 8)
    split = split_unseen_combinations(space, 0.10, seed=9)
    for role in ("train", "test"):
        buf = io.StringIO()
        write_split(split, space, role, buf)
        buf.seek(0)
        got_space, seed, got_role, inputs = read_split_part(buf)
        assert (got_space, seed, got_role) == (space, 9, role)
        np.testing.assert_array_equal(inputs, getattr(split, role))


def test_split_header_errors():
    with pytest.raises(ValueError):
        read_split_part(io.StringIO("not a header\n0 1\n"))
