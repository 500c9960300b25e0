import io
import itertools

import numpy as np
import pytest

from emlab.agents import ChannelSpec
from emlab.env import AttributeSpace, enumerate_inputs
from emlab.fixtures import miniature_languages
from emlab.metrics import (
    JointCounts,
    LanguageCorpus,
    bosdis,
    edit_distance,
    entropy,
    input_distance,
    metric_report,
    mutual_information,
    posdis,
    read_corpus,
    topsim,
    write_corpus,
)


def make_corpus(n_att, n_val, c_voc, c_len, messages):
    space = AttributeSpace(n_att, n_val)
    return LanguageCorpus(
        space=space,
        channel=ChannelSpec(c_voc, c_len),
        inputs=enumerate_inputs(space),
        messages=np.asarray(messages, dtype=np.int64),
    )


def identity_language(n_att, n_val):
    """Position j copies attribute j: the canonical fully positional language."""
    space = AttributeSpace(n_att, n_val)
    inputs = enumerate_inputs(space)
    return make_corpus(n_att, n_val, n_val, n_att, inputs.copy())


def random_corpus(rng, n_att=None, n_val=None, c_voc=None, c_len=None):
    n_att = n_att or int(rng.integers(2, 4))
    n_val = n_val or int(rng.integers(2, 5))
    c_voc = c_voc or int(rng.integers(3, 9))
    c_len = c_len or int(rng.integers(2, 5))
    space = AttributeSpace(n_att, n_val)
    inputs = enumerate_inputs(space)
    messages = rng.integers(0, c_voc, size=(len(inputs), c_len))
    return make_corpus(n_att, n_val, c_voc, c_len, messages)


class TestInputDistance:
    def test_examples(self):
        assert input_distance((0, 0), (0, 0)) == 0
        assert input_distance((0, 1), (0, 2)) == 1
        assert input_distance((3, 1), (1, 3)) == 2

    def test_mismatched_spaces(self):
        with pytest.raises(ValueError):
            input_distance((0, 1), (0, 1, 2))


class TestEditDistance:
    def test_identical(self):
        assert edit_distance((1, 2, 3), (1, 2, 3)) == 0

    def test_single_substitution(self):
        assert edit_distance((1, 2, 3), (1, 2, 4)) == 1

    def test_shift_by_one(self):
        assert edit_distance((1, 2, 3), (2, 3, 4)) == 2

    def test_unequal_lengths(self):
        assert edit_distance((), (1, 2)) == 2
        assert edit_distance((1, 2, 3, 4), (2, 3)) == 2


class TestEntropyMi:
    def test_uniform_four_way(self):
        assert entropy([25, 25, 25, 25]) == pytest.approx(2.0, abs=1e-12)

    def test_bijective_uniform_map(self):
        xs = [0, 1, 2, 3] * 10
        ys = [3, 1, 0, 2] * 10
        assert mutual_information(JointCounts.from_pairs(xs, ys)) == pytest.approx(2.0)

    def test_independent_uniform(self):
        xs, ys = zip(*itertools.product(range(4), range(5)))
        assert mutual_information(JointCounts.from_pairs(xs, ys)) == pytest.approx(0.0, abs=1e-12)

    def test_marginals_consistent(self):
        jc = JointCounts.from_pairs([0, 0, 1, 2], [1, 1, 0, 1])
        assert jc.table.sum() == 4
        assert jc.x_marginal.tolist() == [2, 1, 1]
        assert jc.y_marginal.tolist() == [1, 3]

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            entropy([])


GOLD = {
    "lang1": {"topsim": 0.82, "posdis": 1.00, "bosdis": 0.42},
    "lang2": {"topsim": 0.75, "posdis": 0.79, "bosdis": 0.13},
    "lang3": {"topsim": 0.75, "posdis": 0.43, "bosdis": 1.00},
}


class TestGoldLanguages:
    @pytest.mark.parametrize("name", sorted(GOLD))
    def test_reference_scores(self, name):
        corpus = miniature_languages()[name]
        report = metric_report(corpus)
        for metric in ("topsim", "posdis", "bosdis"):
            got = getattr(report, metric)
            assert got == pytest.approx(GOLD[name][metric], abs=0.01), (name, metric)

    def test_topsim_uses_all_120_pairs(self):
        corpus = miniature_languages()["lang1"]
        r = topsim(corpus)
        assert r.n == 120


class TestTopsim:
    def test_constant_language_undefined(self):
        corpus = make_corpus(2, 3, 4, 2, np.ones((9, 2), dtype=int))
        assert topsim(corpus) is None

    def test_identity_language_is_perfect(self):
        corpus = identity_language(2, 4)
        assert topsim(corpus).rho == pytest.approx(1.0)

    def test_pair_sampling_close_to_exact(self):
        corpus = random_corpus(np.random.default_rng(5), n_att=2, n_val=7)
        exact = topsim(corpus).rho
        sampled = topsim(corpus, pair_cap=600, seed=0).rho  # 1176 pairs total
        assert sampled == pytest.approx(exact, abs=0.15)

    def test_input_reordering_invariance(self):
        corpus = random_corpus(np.random.default_rng(6))
        perm = np.random.default_rng(1).permutation(len(corpus))
        shuffled = LanguageCorpus(
            corpus.space, corpus.channel, corpus.inputs[perm], corpus.messages[perm]
        )
        assert topsim(shuffled).rho == pytest.approx(topsim(corpus).rho)


class TestPosdis:
    def test_identity_language_is_one(self):
        assert posdis(identity_language(2, 5)) == pytest.approx(1.0)
        assert posdis(identity_language(3, 3)) == pytest.approx(1.0)

    def test_constant_positions_are_skipped(self):
        # identity coding plus two constant filler positions
        base = identity_language(2, 4)
        messages = np.concatenate(
            [base.messages, np.zeros((len(base), 2), dtype=int)], axis=1
        )
        corpus = make_corpus(2, 4, 4, 4, messages)
        assert posdis(corpus) == pytest.approx(1.0)

    def test_fully_constant_language_undefined(self):
        corpus = make_corpus(2, 3, 4, 3, np.full((9, 3), 2))
        assert posdis(corpus) is None

    def test_single_attribute_space(self):
        # with one attribute the gap is the full information
        space = AttributeSpace(1, 4)
        corpus = LanguageCorpus(
            space, ChannelSpec(4, 1), enumerate_inputs(space), np.arange(4)[:, None]
        )
        assert posdis(corpus) == pytest.approx(1.0)


class TestBosdis:
    def test_within_message_permutation_invariance(self):
        rng = np.random.default_rng(7)
        corpus = random_corpus(rng)
        permuted = corpus.messages.copy()
        for i in range(len(permuted)):
            permuted[i] = permuted[i][rng.permutation(permuted.shape[1])]
        shuffled = LanguageCorpus(corpus.space, corpus.channel, corpus.inputs, permuted)
        a, b = bosdis(corpus), bosdis(shuffled)
        assert a == pytest.approx(b, abs=1e-12)

    def test_constant_counts_undefined(self):
        corpus = make_corpus(2, 3, 4, 2, np.tile([1, 2], (9, 1)))
        assert bosdis(corpus) is None


class TestMetricReport:
    def test_bundles_scores_and_notes(self):
        report = metric_report(miniature_languages()["lang1"])
        assert report.notes == {}
        degenerate = make_corpus(2, 3, 4, 2, np.ones((9, 2), dtype=int))
        report = metric_report(degenerate)
        assert report.topsim is None and "topsim" in report.notes
        assert report.posdis is None and "posdis" in report.notes
        assert report.bosdis is None and "bosdis" in report.notes

    def test_to_dict_round_trips_through_json(self):
        import json

        report = metric_report(miniature_languages()["lang2"])
        blob = json.loads(json.dumps(report.to_dict()))
        assert blob["posdis"] == pytest.approx(report.posdis)


class TestCorpusValidation:
    def test_duplicate_inputs_rejected(self):
        space = AttributeSpace(2, 2)
        with pytest.raises(ValueError):
            LanguageCorpus(
                space,
                ChannelSpec(3, 2),
                np.array([[0, 0], [0, 0]]),
                np.array([[0, 1], [1, 0]]),
            )

    def test_ambiguity_flag(self):
        space = AttributeSpace(2, 2)
        corpus = LanguageCorpus(
            space,
            ChannelSpec(3, 2),
            np.array([[0, 0], [0, 1], [1, 0], [1, 1]]),
            np.array([[0, 1], [0, 1], [1, 0], [2, 2]]),
        )
        assert corpus.ambiguous
        assert not miniature_languages()["lang1"].ambiguous


def test_corpus_file_round_trip():
    for corpus in miniature_languages().values():
        buf = io.StringIO()
        write_corpus(corpus, buf)
        buf.seek(0)
        again = read_corpus(buf)
        assert again.space == corpus.space
        assert again.channel == corpus.channel
        np.testing.assert_array_equal(again.inputs, corpus.inputs)
        np.testing.assert_array_equal(again.messages, corpus.messages)


def test_corpus_parse_errors_name_the_line():
    bad = "2 4 8 3\n0 0\t0 0 0\n0 1 broken\n"
    with pytest.raises(ValueError, match="line 3"):
        read_corpus(io.StringIO(bad))
