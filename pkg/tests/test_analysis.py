"""Agreement and correlation statistics against hand-worked values."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ns_of
from iclkit import (
    ContingencyMatrix,
    Prediction,
    RelevanceVerdict,
    accuracy,
    accuracy_diff_grid,
    cohen_kappa,
    contingency,
    inclusion_score,
    pearson,
    relevance_score,
    same_label_stats,
    verdict_contingency,
)


def preds(model, pairs):
    return [Prediction(query_id=qid, label=label, model=model) for qid, label in pairs]


class TestContingency:
    def test_worked_example(self):
        # pairs (A,A), (A,B), (B,B), (B,B) over four queries
        a = preds("m1", [("q1", "A"), ("q2", "A"), ("q3", "B"), ("q4", "B")])
        b = preds("m2", [("q1", "A"), ("q2", "B"), ("q3", "B"), ("q4", "B")])
        m = contingency(a, b, ["A", "B"])
        assert m.counts == ((1, 1), (0, 2))
        assert m.n == 4

    def test_pairwise_exclusion_uses_shared_queries_only(self):
        a = preds("m1", [("q1", "A"), ("q2", "A")])
        b = preds("m2", [("q2", "A"), ("q3", "B")])
        m = contingency(a, b, ["A", "B"])
        assert m.n == 1
        assert m.counts[0][0] == 1

    def test_disjoint_query_sets_give_empty_matrix(self):
        m = contingency(preds("m1", [("q1", "A")]), preds("m2", [("q2", "A")]), ["A", "B"])
        assert m.n == 0

    def test_duplicate_predictions_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            contingency(preds("m1", [("q1", "A"), ("q1", "B")]), preds("m2", [("q1", "A")]), ["A", "B"])

    def test_label_outside_space_rejected(self):
        with pytest.raises(ValueError, match="outside label space"):
            contingency(preds("m1", [("q1", "Z")]), preds("m2", [("q1", "A")]), ["A", "B"])

    def test_matrix_validation(self):
        with pytest.raises(ValueError, match="counts sum"):
            ContingencyMatrix(labels=("A", "B"), counts=((1, 0), (0, 0)), n=5)
        with pytest.raises(ValueError, match="2x2"):
            ContingencyMatrix(labels=("A", "B"), counts=((1,),), n=1)
        with pytest.raises(ValueError, match="non-negative"):
            ContingencyMatrix(labels=("A", "B"), counts=((-1, 1), (0, 1)), n=1)


class TestCohenKappa:
    def test_worked_example(self):
        m = ContingencyMatrix(labels=("A", "B"), counts=((1, 1), (0, 2)), n=4)
        report = cohen_kappa(m)
        assert report.p_o == pytest.approx(0.75, abs=1e-15)
        assert report.p_e == pytest.approx(0.5, abs=1e-15)
        assert report.kappa == pytest.approx(0.5, abs=1e-15)
        assert not report.degenerate

    def test_perfect_agreement_on_two_labels(self):
        m = ContingencyMatrix(labels=("A", "B"), counts=((3, 0), (0, 2)), n=5)
        assert cohen_kappa(m).kappa == 1.0

    def test_both_raters_constant_is_degenerate(self):
        m = ContingencyMatrix(labels=("A", "B"), counts=((4, 0), (0, 0)), n=4)
        report = cohen_kappa(m)
        assert report.degenerate
        assert report.kappa == 0.0
        assert report.p_e == 1.0

    def test_constant_disagreement_is_zero_not_degenerate(self):
        m = ContingencyMatrix(labels=("A", "B"), counts=((0, 4), (0, 0)), n=4)
        report = cohen_kappa(m)
        assert report.kappa == 0.0
        assert not report.degenerate

    def test_empty_matrix_rejected(self):
        m = ContingencyMatrix(labels=("A", "B"), counts=((0, 0), (0, 0)), n=0)
        with pytest.raises(ValueError, match="at least one"):
            cohen_kappa(m)

    def test_independent_raters_score_near_zero(self):
        rng = random.Random(17)
        labels = ["A", "B", "C"]
        a, b = [], []
        for i in range(10_000):
            a.append((f"q{i}", rng.choice(labels)))
            b.append((f"q{i}", rng.choice(labels)))
        report = cohen_kappa(contingency(preds("m1", a), preds("m2", b), labels))
        assert abs(report.kappa) < 0.03

    @given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=1, max_size=30))
    @settings(max_examples=100)
    def test_label_permutation_invariance(self, pairs):
        labels = ("A", "B", "C")
        a = [(f"q{i}", labels[x % 3]) for i, (x, _) in enumerate(pairs)]
        b = [(f"q{i}", labels[y % 3]) for i, (_, y) in enumerate(pairs)]
        base = cohen_kappa(contingency(preds("m1", a), preds("m2", b), labels))
        perm = {"A": "C", "B": "A", "C": "B"}
        a2 = [(q, perm[l]) for q, l in a]
        b2 = [(q, perm[l]) for q, l in b]
        swapped = cohen_kappa(contingency(preds("m1", a2), preds("m2", b2), labels))
        assert swapped.kappa == pytest.approx(base.kappa, abs=1e-12)
        assert swapped.degenerate == base.degenerate

    @given(st.lists(st.integers(0, 3), min_size=2, max_size=40))
    @settings(max_examples=100)
    def test_diagonal_matrices_score_one_unless_degenerate(self, draws):
        labels = ("A", "B", "C", "D")
        joint = [(f"q{i}", labels[d]) for i, d in enumerate(draws)]
        report = cohen_kappa(contingency(preds("m1", joint), preds("m2", joint), labels))
        if len({l for _, l in joint}) == 1:
            assert report.degenerate
        else:
            assert report.kappa == pytest.approx(1.0, abs=1e-12)


class TestVerdictContingency:
    def verdict(self, qid, ex, relevant, annotator):
        return RelevanceVerdict(query_id=qid, example_id=ex, relevant=relevant, annotator_id=annotator)

    def test_two_by_two_counts(self):
        a = [self.verdict("q1", "e1", True, "human:h"), self.verdict("q1", "e2", False, "human:h")]
        b = [self.verdict("q1", "e1", True, "llm:m"), self.verdict("q1", "e2", True, "llm:m")]
        m = verdict_contingency(a, b)
        assert m.labels == ("No", "Yes")
        assert m.counts == ((0, 1), (0, 1))
        assert m.n == 2

    def test_only_shared_pairs_counted(self):
        a = [self.verdict("q1", "e1", True, "h")]
        b = [self.verdict("q9", "e9", True, "m")]
        assert verdict_contingency(a, b).n == 0

    def test_duplicate_pair_rejected(self):
        a = [self.verdict("q1", "e1", True, "h"), self.verdict("q1", "e1", False, "h")]
        with pytest.raises(ValueError, match="duplicate"):
            verdict_contingency(a, [])


class TestRelevanceScore:
    def verdicts(self, flags, qid="q1", annotator="llm:m"):
        return [
            RelevanceVerdict(query_id=qid, example_id=f"e{i}", relevant=f, annotator_id=annotator)
            for i, f in enumerate(flags)
        ]

    def test_mean_of_boolean_verdicts(self):
        score = relevance_score(self.verdicts([True, True, True, False]), k=4)
        assert score.score == 0.75
        assert score.k == 4
        assert score.annotator == "llm:m"

    def test_count_must_equal_k(self):
        with pytest.raises(ValueError, match="exactly 3"):
            relevance_score(self.verdicts([True, False]), k=3)

    def test_mixed_queries_rejected(self):
        mixed = self.verdicts([True]) + self.verdicts([False], qid="q2")
        with pytest.raises(ValueError, match="one \\(query, annotator\\) pair"):
            relevance_score(mixed, k=2)

    def test_duplicate_examples_rejected(self):
        dupes = self.verdicts([True]) * 2
        with pytest.raises(ValueError, match="duplicate example_ids"):
            relevance_score(dupes, k=2)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="needs judgments"):
            relevance_score([], k=1)


class TestAccuracy:
    def test_fraction_of_matches(self):
        gold = {"q1": "A", "q2": "B", "q3": "A", "q4": "B"}
        report = accuracy(preds("m", [("q1", "A"), ("q2", "B"), ("q3", "B"), ("q4", "B")]), gold)
        assert report.value == 0.75
        assert report.n_valid == 4

    def test_excluded_count_carried_through(self):
        report = accuracy(preds("m", [("q1", "A")]), {"q1": "A"}, excluded=3)
        assert report.n_excluded == 3

    def test_empty_predictions_undefined_not_zero(self):
        report = accuracy([], {"q1": "A"}, excluded=2)
        assert report.undefined
        assert report.value is None
        assert report.n_excluded == 2

    def test_unknown_query_rejected(self):
        with pytest.raises(KeyError):
            accuracy(preds("m", [("q9", "A")]), {"q1": "A"})


class TestAccuracyDiffGrid:
    def test_diffs_and_holes(self):
        cells = accuracy_diff_grid(
            {
                ("d", 1, "knn", "llm"): (0.9, 0.8),
                ("d", 5, "knn", "llm"): (None, 0.8),
            }
        )
        assert cells[0].diff == pytest.approx(0.1)
        assert not cells[0].hole
        assert cells[1].diff is None
        assert cells[1].hole


class TestInclusionScore:
    def test_fraction_of_human_pairs_included(self):
        human = [("q1", "e1"), ("q1", "e2")]
        machine = [("q1", "e1"), ("q1", "e3")]
        report = inclusion_score(human, machine)
        assert report.value == 0.5
        assert report.n_human == 2
        assert report.n_shared == 1

    def test_complete_inclusion(self):
        human = [("q1", "e1")]
        machine = [("q1", "e1"), ("q2", "e9")]
        assert inclusion_score(human, machine).value == 1.0

    def test_empty_human_set_is_undefined(self):
        report = inclusion_score([], [("q1", "e1")])
        assert report.undefined
        assert report.value is None

    def test_monotone_in_machine_set(self):
        rng = random.Random(3)
        human = [(f"q{i}", f"e{i}") for i in range(20)]
        machine: list = []
        last = 0.0
        for i in range(20):
            machine.append(human[rng.randrange(20)])
            value = inclusion_score(human, machine).value
            assert value >= last
            last = value


class TestPearson:
    def test_positive_affine_relation_is_one(self):
        x = [1.0, 2.0, 5.0, 7.0]
        y = [3 * v + 2 for v in x]
        report = pearson(x, y)
        assert report.r == 1.0
        assert report.r_squared == 1.0

    def test_negative_affine_relation_is_minus_one(self):
        x = [1.0, 2.0, 5.0]
        assert pearson(x, [-2 * v + 1 for v in x]).r == -1.0

    def test_r_squared_is_exactly_r_times_r(self):
        report = pearson([1.0, 2.0, 3.0, 4.0], [1.2, 1.9, 3.4, 3.6])
        assert report.r_squared == report.r * report.r

    def test_zero_variance_is_undefined(self):
        report = pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
        assert report.undefined
        assert report.r is None

    def test_length_mismatch_and_short_input_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            pearson([1.0], [1.0, 2.0])
        with pytest.raises(ValueError, match="at least 2"):
            pearson([1.0], [2.0])

    @given(
        st.lists(st.floats(-50, 50), min_size=3, max_size=12),
        st.floats(0.1, 5),
        st.floats(-10, 10),
    )
    @settings(max_examples=150)
    def test_affine_invariance_and_range(self, xs, scale, shift):
        ys = [scale * v + shift for v in xs]
        if max(xs) - min(xs) < 1e-6:
            return
        report = pearson(xs, ys)
        assert report.r == pytest.approx(1.0, abs=1e-9)
        base = pearson(xs, list(reversed(xs)))
        if base.r is not None:
            assert -1.0 <= base.r <= 1.0
            assert base.r == pytest.approx(pearson(list(reversed(xs)), xs).r, abs=1e-12)


class TestSameLabelStats:
    def test_partition_rates(self):
        sets = {
            "q1": ns_of([("a", 0.9, "X"), ("b", 0.8, "X")], query_id="q1"),
            "q2": ns_of([("c", 0.9, "X"), ("d", 0.8, "Y")], query_id="q2"),
            "q3": ns_of([("e", 0.9, "Y"), ("f", 0.8, "Y")], query_id="q3"),
        }
        a = preds("m1", [("q1", "X"), ("q2", "X"), ("q3", "Y")])
        b = preds("m2", [("q1", "X"), ("q2", "Y"), ("q3", "Y")])
        report = same_label_stats(sets, a, b)
        assert report.pct_all_same_label == pytest.approx(2 / 3)
        assert report.agree_rate_given_same == 1.0
        assert report.agree_rate_given_diff == 0.0
        assert report.n == 3

    def test_empty_partition_rate_is_undefined(self):
        sets = {"q1": ns_of([("a", 0.9, "X")], query_id="q1")}
        report = same_label_stats(sets, preds("m1", [("q1", "X")]), preds("m2", [("q1", "X")]))
        assert report.agree_rate_given_diff is None

    def test_no_shared_queries_rejected(self):
        with pytest.raises(ValueError, match="no query"):
            same_label_stats({}, preds("m1", [("q1", "X")]), preds("m2", [("q1", "X")]))


# exhaustive and randomized kappa oracle checks live in test_acceptance.py
