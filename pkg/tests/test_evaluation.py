import math
import random

import pytest

from absakit import (
    ACSA,
    TASD,
    Aggregate,
    EmptyScoresError,
    ErrorKind,
    ErrorRecord,
    LengthMismatchError,
    RunScore,
    aggregate,
    classify_errors,
    micro_f1,
)
from absakit.evaluation import levenshtein
from support import brute_force_score


def random_label_tuples(rng, max_count=5):
    terms = ["soup", "staff", "coffee", "NULL", "menu"]
    cats = ["FOOD#QUALITY", "SERVICE#GENERAL", "DRINKS#PRICES"]
    pols = ["positive", "neutral", "negative"]
    out = set()
    for _ in range(rng.randint(0, max_count)):
        out.add((rng.choice(terms), rng.choice(cats), rng.choice(pols)))
    return list(out)


class TestMicroF1:
    def test_perfect_predictions(self):
        golds = [[("a", "X#Y", "positive")], [("b", "X#Y", "negative")]]
        score = micro_f1(golds, golds)
        assert (score.precision, score.recall, score.f1) == (1.0, 1.0, 1.0)

    def test_hand_case(self):
        # one example, 3 predicted / 4 gold / 2 correct
        gold = [("g1",), ("g2",), ("g3",), ("g4",)]
        pred = [("g1",), ("g2",), ("wrong",)]
        score = micro_f1([pred], [gold])
        assert math.isclose(score.precision, 2 / 3, abs_tol=1e-12)
        assert math.isclose(score.recall, 1 / 2, abs_tol=1e-12)
        assert math.isclose(score.f1, 4 / 7, abs_tol=1e-12)

    def test_all_empty_predictions(self):
        golds = [[("a", "X#Y", "positive")]]
        score = micro_f1([[]], golds)
        assert (score.precision, score.recall, score.f1) == (0.0, 0.0, 0.0)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            micro_f1([[]], [[], []])

    def test_permutation_invariance(self):
        rng = random.Random(5)
        for _ in range(100):
            pred = random_label_tuples(rng)
            gold = random_label_tuples(rng)
            base = micro_f1([pred], [gold])
            rng.shuffle(pred)
            rng.shuffle(gold)
            assert micro_f1([pred], [gold]) == base

    def test_matches_brute_force_oracle(self):
        rng = random.Random(12)
        for _ in range(300):
            n = rng.randint(1, 4)
            preds = [random_label_tuples(rng) for _ in range(n)]
            golds = [random_label_tuples(rng) for _ in range(n)]
            score = micro_f1(preds, golds)
            oracle = brute_force_score(preds, golds)
            assert (
                score.precision, score.recall, score.f1,
                score.n_pred, score.n_gold, score.n_correct,
            ) == oracle

    def test_counts_bound(self):
        score = RunScore.from_counts(3, 4, 2)
        assert score.n_correct <= min(score.n_pred, score.n_gold)


class TestAggregate:
    def test_hand_case(self):
        agg = aggregate([0.50, 0.52, 0.54, 0.51, 0.53])
        assert math.isclose(agg.mean, 0.520, abs_tol=1e-9)
        # s = sqrt(0.00025); 1.96 * s / sqrt(5)
        assert math.isclose(agg.half_width, 0.0138593, abs_tol=1e-4)
        assert agg.n_runs == 5

    def test_identical_scores(self):
        assert aggregate([0.7, 0.7, 0.7]).half_width == 0.0

    def test_single_score(self):
        assert aggregate([0.7]) == Aggregate(0.7, 0.0, 1)

    def test_empty(self):
        with pytest.raises(EmptyScoresError):
            aggregate([])

    def test_translation_behaviour(self):
        rng = random.Random(3)
        for _ in range(50):
            scores = [rng.random() for _ in range(rng.randint(2, 8))]
            shift = rng.random()
            base = aggregate(scores)
            shifted = aggregate([s + shift for s in scores])
            assert math.isclose(shifted.mean, base.mean + shift, abs_tol=1e-9)
            assert math.isclose(shifted.half_width, base.half_width, abs_tol=1e-9)


class TestLevenshtein:
    @pytest.mark.parametrize(
        "a,b,expected",
        [("", "", 0), ("a", "", 1), ("abc", "abc", 0), ("sevrice", "service", 2),
         ("kitten", "sitting", 3)],
    )
    def test_known_distances(self, a, b, expected):
        assert levenshtein(a, b) == expected


class TestClassifyErrors:
    def test_typo_like_term(self):
        sentence = "The service was fine today"
        pred = [("sevrice", "SERVICE#GENERAL", "positive")]
        gold = [("service", "SERVICE#GENERAL", "positive")]
        records = classify_errors(pred, gold, sentence)
        assert [r.kind for r in records] == [ErrorKind.TERM_TYPO_LIKE]

    def test_wrong_language_term_not_in_input(self):
        sentence = "The soup was cold"
        pred = [("sopa", "FOOD#QUALITY", "negative")]
        gold = [("soup", "FOOD#QUALITY", "negative")]
        records = classify_errors(pred, gold, sentence)
        assert [r.kind for r in records] == [ErrorKind.TERM_NOT_IN_INPUT]

    def test_partial_overlap_term(self):
        sentence = "The warm soup was great"
        pred = [("soup", "FOOD#QUALITY", "positive")]
        gold = [("warm soup", "FOOD#QUALITY", "positive")]
        records = classify_errors(pred, gold, sentence)
        assert [r.kind for r in records] == [ErrorKind.TERM_PARTIAL_OVERLAP]

    def test_category_confusion(self):
        sentence = "Lovely place"
        pred = [("NULL", "RESTAURANT#GENERAL", "positive")]
        gold = [("NULL", "RESTAURANT#MISCELLANEOUS", "positive")]
        records = classify_errors(pred, gold, sentence)
        assert [r.kind for r in records] == [ErrorKind.CATEGORY_CONFUSION]

    def test_polarity_confusion(self):
        sentence = "The soup was fine"
        pred = [("soup", "FOOD#QUALITY", "neutral")]
        gold = [("soup", "FOOD#QUALITY", "positive")]
        records = classify_errors(pred, gold, sentence)
        assert [r.kind for r in records] == [ErrorKind.POLARITY_CONFUSION]

    def test_multi_element(self):
        sentence = "The soup was fine"
        pred = [("soup", "DRINKS#PRICES", "negative")]
        gold = [("soup", "FOOD#QUALITY", "positive")]
        records = classify_errors(pred, gold, sentence)
        assert [r.kind for r in records] == [ErrorKind.MULTI_ELEMENT]

    def test_missing_and_spurious(self):
        sentence = "The soup was fine"
        gold = [("soup", "FOOD#QUALITY", "positive")]
        records = classify_errors([], gold, sentence)
        assert [r.kind for r in records] == [ErrorKind.MISSING]
        assert records[0].pred is None and records[0].gold == gold[0]

        pred = [("decor", "AMBIENCE#GENERAL", "negative")]
        records = classify_errors(pred, [], sentence)
        assert [r.kind for r in records] == [ErrorKind.SPURIOUS]
        assert records[0].gold is None

    def test_exact_matches_removed_first(self):
        sentence = "soup and staff"
        shared = ("soup", "FOOD#QUALITY", "positive")
        pred = [shared, ("staff", "SERVICE#GENERAL", "negative")]
        gold = [shared, ("staff", "SERVICE#GENERAL", "positive")]
        records = classify_errors(pred, gold, sentence)
        assert [r.kind for r in records] == [ErrorKind.POLARITY_CONFUSION]

    def test_acsa_tuples(self):
        sentence = "Lovely place"
        pred = [("RESTAURANT#GENERAL", "positive")]
        gold = [("RESTAURANT#MISCELLANEOUS", "positive")]
        records = classify_errors(pred, gold, sentence, ACSA)
        assert [r.kind for r in records] == [ErrorKind.CATEGORY_CONFUSION]

    def test_record_invariants(self):
        with pytest.raises(ValueError):
            ErrorRecord(ErrorKind.MISSING, pred=("x",), gold=("y",))
        with pytest.raises(ValueError):
            ErrorRecord(ErrorKind.SPURIOUS, pred=("x",), gold=("y",))

    def test_cardinality_property(self):
        rng = random.Random(77)
        sentence = "soup staff coffee menu decor"
        for _ in range(300):
            pred = random_label_tuples(rng)
            gold = random_label_tuples(rng)
            records = classify_errors(pred, gold, sentence)
            pred_set, gold_set = set(pred), set(gold)
            unmatched_gold = [g for g in gold_set if g not in pred_set]
            unmatched_pred = [p for p in pred_set if p not in gold_set]
            # every unmatched tuple appears in exactly one record
            gold_mentions = [r.gold for r in records if r.gold is not None]
            pred_mentions = [r.pred for r in records if r.pred is not None]
            assert sorted(gold_mentions) == sorted(unmatched_gold)
            assert sorted(pred_mentions) == sorted(unmatched_pred)
            aligned = sum(
                1 for r in records if r.pred is not None and r.gold is not None
            )
            missing = sum(1 for r in records if r.kind is ErrorKind.MISSING)
            spurious = sum(1 for r in records if r.kind is ErrorKind.SPURIOUS)
            assert len(records) == aligned + missing + spurious
