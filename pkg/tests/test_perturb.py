import io

import pytest

from argrobust.labels import BinaryLabel
from argrobust.metrics import Granularity, PredictionRecord
from argrobust.perturb import (
    CONNECTOR_TOKENS,
    AnnFlag,
    PairOrder,
    PerturbationSchemaError,
    assemble_t1,
    eval_perturbation,
    extract_adjacent_pairs,
    gen_t1_candidates,
    gen_t2,
    gen_t3,
    read_pairs,
    write_pairs,
)
from fixtures import CON, NON, PRO, sent, synthetic_corpus


def sentence_pred(pair_id, label, run=0):
    return PredictionRecord(
        sentence_id=pair_id, run=run, granularity=Granularity.SENTENCE,
        sentence_label=label,
    )


class TestExtractAdjacentPairs:
    def test_figure_style_sentence(self):
        s = sent("gc", "gun control", 0,
                 ["Yes", ",", "guns", "protect", "us", "."],
                 [NON, NON, CON, CON, CON, NON])
        pairs = extract_adjacent_pairs([s], PairOrder.ARG_FIRST)
        # trailing NON segment is "." only -> excluded; no ARG-first pair left
        assert pairs == []
        pairs = extract_adjacent_pairs([s], PairOrder.NONARG_FIRST)
        assert len(pairs) == 1
        assert pairs[0].nonarg_tokens == ("Yes", ",")
        assert pairs[0].arg_tokens == ("guns", "protect", "us")

    def test_all_non_sentence(self):
        s = sent("x", "abortion", 0, ["a", "b"], [NON, NON])
        assert extract_adjacent_pairs([s]) == []

    def test_matches_adjacency_enumeration(self):
        s = sent("x", "abortion", 0, ["p", "n1", "c", "n2"],
                 [PRO, NON, CON, NON])
        pairs = extract_adjacent_pairs([s])
        got = {(p.arg_span, p.nonarg_span, p.order) for p in pairs}
        assert got == {
            ((0, 1), (1, 2), PairOrder.ARG_FIRST),
            ((2, 3), (1, 2), PairOrder.NONARG_FIRST),
            ((2, 3), (3, 4), PairOrder.ARG_FIRST),
        }

    def test_pair_ids_unique_on_fixture(self, big_corpus):
        pairs = extract_adjacent_pairs(big_corpus)
        assert len({p.pair_id for p in pairs}) == len(pairs)


ANN_SENTENCE = sent(
    "ab-1", "abortion", 0,
    ["Politicians", "think", "that", "abortion", "is", "wrong"],
    [NON, NON, NON, CON, CON, CON],
)


class TestT1:
    def make_candidates(self):
        pairs = extract_adjacent_pairs([ANN_SENTENCE], PairOrder.NONARG_FIRST)
        return gen_t1_candidates(pairs)

    def test_candidates_are_open_for_annotation(self):
        (cand,) = self.make_candidates()
        assert cand.ann_flag is None
        assert cand.after_tokens is None
        assert cand.gold_before is BinaryLabel.ARG
        assert cand.before_tokens == ANN_SENTENCE.tokens

    def test_arg_first_pairs_do_not_qualify(self):
        pairs = extract_adjacent_pairs([ANN_SENTENCE])
        assert gen_t1_candidates(pairs) == gen_t1_candidates(
            [p for p in pairs if p.order is PairOrder.NONARG_FIRST]
        )

    def test_empty_input(self):
        assert gen_t1_candidates([]) == []

    def annotate(self, cand, flag, completion=None):
        from dataclasses import replace

        return replace(
            cand,
            ann_flag=flag,
            completion_tokens=tuple(completion) if completion else None,
        )

    def test_assemble_ann_with_completion(self):
        (cand,) = self.make_candidates()
        completion = ["the", "debate", "is", "delicate", "."]
        (done,) = assemble_t1([self.annotate(cand, AnnFlag.ANN, completion)])
        assert done.after_tokens == ("Politicians", "think", "that") + tuple(completion)
        assert done.gold_after is BinaryLabel.NON_ARG
        assert done.gold_before is BinaryLabel.ARG
        # announcing prefix identical on both sides
        n = len(("Politicians", "think", "that"))
        assert done.before_tokens[:n] == done.after_tokens[:n]

    def test_discard_and_non_ann_rows_dropped(self):
        (cand,) = self.make_candidates()
        assert assemble_t1([self.annotate(cand, AnnFlag.DISCARD)]) == []
        assert assemble_t1([self.annotate(cand, AnnFlag.NON_ANN)]) == []

    def test_ann_without_completion_fails(self):
        (cand,) = self.make_candidates()
        with pytest.raises(PerturbationSchemaError, match="completion"):
            assemble_t1([self.annotate(cand, AnnFlag.ANN)])

    def test_completion_equal_to_original_fails(self):
        (cand,) = self.make_candidates()
        row = self.annotate(cand, AnnFlag.ANN, ["abortion", "is", "wrong"])
        with pytest.raises(PerturbationSchemaError, match="identical"):
            assemble_t1([row])

    def test_zero_ann_rows_gives_empty_set(self):
        assert assemble_t1([]) == []


class TestT2:
    def corpus(self):
        return [
            sent("a1", "abortion", 0, ["Uniforms", "force", "conformity"],
                 [PRO, PRO, PRO]),
            sent("a2", "abortion", 1, ["it", "is", "cheap", "."],
                 [NON, NON, NON, NON]),
            sent("a3", "abortion", 2, ["mixed", "but", "fine"],
                 [CON, NON, NON]),
        ]

    def test_connector_always_present(self):
        pairs = gen_t2(self.corpus(), count_per_topic=5, seed=3)
        assert pairs
        for p in pairs:
            tokens = p.after_tokens
            idx = len(p.before_tokens)
            assert tokens[idx:idx + 3] == CONNECTOR_TOKENS
            assert p.gold_before is BinaryLabel.ARG
            assert p.gold_after is BinaryLabel.ARG

    def test_count_zero(self):
        assert gen_t2(self.corpus(), 0, seed=1) == []

    def test_missing_nonarg_sentences(self):
        corpus = [self.corpus()[0]]
        with pytest.raises(ValueError, match="non-ARG"):
            gen_t2(corpus, 1, seed=1)

    def test_seed_determinism_byte_identical(self, big_corpus):
        def render(seed):
            buf = io.StringIO()
            write_pairs(gen_t2(big_corpus, 10, seed=seed), buf)
            return buf.getvalue()

        assert render(7) == render(7)
        assert render(7) != render(8)


class TestT3:
    def test_after_is_contiguous_subsequence(self, big_corpus):
        pairs = gen_t3(big_corpus, 200, seed=5)
        assert len(pairs) == 200
        for p in pairs:
            before, after = list(p.before_tokens), list(p.after_tokens)
            assert any(
                before[i:i + len(after)] == after
                for i in range(len(before) - len(after) + 1)
            )

    def test_balance_within_tolerance(self, big_corpus):
        pairs = gen_t3(big_corpus, 200, seed=5)
        arg_first = sum(
            1 for p in pairs if p.provenance["order"] == PairOrder.ARG_FIRST.value
        )
        assert abs(arg_first - (len(pairs) - arg_first)) <= 0.1 * len(pairs)

    def test_small_pool_takes_all(self):
        corpus = [
            sent("x1", "abortion", 0, ["good", "but", "costly"], [PRO, NON, NON]),
            sent("x2", "abortion", 1, ["he", "says", "bad"], [NON, NON, CON]),
        ]
        pairs = gen_t3(corpus, 2, seed=0)
        assert len(pairs) == 2

    def test_unsatisfiable_balance_raises(self):
        corpus = [
            sent(f"x{i}", "abortion", i, ["good", "but", "costly"], [PRO, NON, NON])
            for i in range(10)
        ]  # only ARG-first pairs exist
        with pytest.raises(ValueError, match="balance"):
            gen_t3(corpus, 10, seed=0)

    def test_round_trip_through_jsonl(self, big_corpus):
        pairs = gen_t3(big_corpus, 20, seed=2)
        buf = io.StringIO()
        write_pairs(pairs, buf)
        buf.seek(0)
        assert read_pairs(buf) == pairs


class TestEvalPerturbation:
    def make_pairs(self):
        corpus = [
            sent("x1", "abortion", 0, ["a", "but", "c"], [PRO, NON, NON]),
            sent("x2", "abortion", 1, ["d", "so", "f"], [CON, NON, NON]),
            sent("x3", "abortion", 2, ["g", "says", "h"], [NON, NON, PRO]),
            sent("x4", "abortion", 3, ["i", "notes", "j"], [NON, NON, CON]),
        ]
        return gen_t3(corpus, 4, seed=0)

    def test_hand_counted_single_run(self):
        pairs = self.make_pairs()
        # before: 3 of 4 correct (ARG); after: 1 of 4 correct
        before = {0: {
            p.pair_id: sentence_pred(p.pair_id, "ARG" if i < 3 else "NON_ARG")
            for i, p in enumerate(pairs)
        }}
        after = {0: {
            p.pair_id: sentence_pred(p.pair_id, "ARG" if i < 1 else "NON_ARG")
            for i, p in enumerate(pairs)
        }}
        result = eval_perturbation(pairs, before, after)
        assert result.per_run[0].acc_before == 0.75
        assert result.per_run[0].acc_after == 0.25
        assert result.per_run[0].delta_abs == pytest.approx(-0.5)

    def test_identical_predictions_zero_delta(self):
        pairs = self.make_pairs()
        preds = {0: {
            p.pair_id: sentence_pred(p.pair_id, "ARG") for p in pairs
        }}
        result = eval_perturbation(pairs, preds, preds)
        assert result.per_run[0].delta_abs == 0.0

    def test_missing_prediction_fails(self):
        pairs = self.make_pairs()
        preds = {0: {pairs[0].pair_id: sentence_pred(pairs[0].pair_id, "ARG")}}
        with pytest.raises(Exception, match="missing"):
            eval_perturbation(pairs, preds, preds)

    def test_token_predictions_are_reduced(self):
        pairs = self.make_pairs()

        def token_pred(p, labels):
            return PredictionRecord(
                sentence_id=p.pair_id, run=0, granularity=Granularity.TOKEN,
                token_labels=tuple(labels),
            )

        before = {0: {
            p.pair_id: token_pred(p, ["PRO"] + ["NON"] * (len(p.before_tokens) - 1))
            for p in pairs
        }}
        after = {0: {
            p.pair_id: token_pred(p, ["NON"] * len(p.after_tokens)) for p in pairs
        }}
        result = eval_perturbation(pairs, before, after)
        assert result.per_run[0].acc_before == 1.0  # any stance token -> ARG
        assert result.per_run[0].acc_after == 0.0
