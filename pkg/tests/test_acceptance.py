"""Acceptance suite: one test and one printed pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
summary lines on stdout.
"""

import dataclasses
import itertools
import json
import random
import time
from contextlib import contextmanager

import numpy as np
import pytest
from click.testing import CliRunner

from argrobust.cli import main
from argrobust.corpus import (
    Scheme,
    Split,
    assign_splits,
    corpus_stats,
    segmentize,
    split_sentences,
    write_corpus,
)
from argrobust.labels import BinaryLabel, derive_sentence_label
from argrobust.metrics import delta_acc, sentence_segment_f1
from argrobust.perturb import (
    AnnFlag,
    CONNECTOR_TOKENS,
    PairOrder,
    assemble_t1,
    extract_adjacent_pairs,
    gen_t1_candidates,
    gen_t2,
    gen_t3,
)
from argrobust.reprogate import compare_table, read_entries
from argrobust.subpop import SubpopRecord, point_biserial
from fixtures import (
    CON,
    NON,
    PRO,
    oracle_sentence_label_table,
    oracle_sentence_segment_f1,
    sent,
    synthetic_corpus,
)


@contextmanager
def criterion(number, title):
    try:
        yield
    except BaseException:
        print(f"criterion {number} [{title}]: FAIL")
        raise
    print(f"criterion {number} [{title}]: PASS")


def test_criterion_1_sentence_label_rule_exhaustive():
    with criterion(1, "sentence label rule, exhaustive"):
        start = time.perf_counter()
        n_cases = n_ties = 0
        for n in range(1, 7):
            for combo in itertools.product([PRO, CON, NON], repeat=n):
                n_cases += 1
                key = "".join(l.value[0] for l in combo)
                got = derive_sentence_label(combo, seed=0, key=key)
                pro = combo.count(PRO)
                con = combo.count(CON)
                is_tie = pro == con and pro > 0
                if is_tie:
                    n_ties += 1
                    assert got in (PRO, CON)
                    for _ in range(100):
                        assert derive_sentence_label(combo, seed=0, key=key) == got
                else:
                    assert got == oracle_sentence_label_table(combo, tie_value=None)
        elapsed = time.perf_counter() - start
        assert n_cases == 3 + 9 + 27 + 81 + 243 + 729
        assert n_ties > 0
        assert elapsed < 1.0, f"took {elapsed:.2f}s"


def test_criterion_2_segment_score_oracle_equivalence():
    with criterion(2, "segment score equals brute-force oracle"):
        all_non = sent("x", "abortion", 0, ["a", "b"], [NON, NON])
        assert sentence_segment_f1(all_non, segmentize(all_non), [NON, NON]) == 1.0
        assert sentence_segment_f1(all_non, segmentize(all_non), [PRO, NON]) == 0.0
        rng = random.Random(20240817)
        for _ in range(1000):
            n = rng.randint(1, 12)
            gold = [rng.choice([PRO, CON, NON]) for _ in range(n)]
            pred = [rng.choice([PRO, CON, NON]) for _ in range(n)]
            s = sent("x", "abortion", 0, ["w"] * n, gold)
            got = sentence_segment_f1(s, segmentize(s), pred)
            assert got == oracle_sentence_segment_f1(gold, pred)


# (before, after, absolute delta, relative delta in %) reference grid for the
# nine accuracy drops/gains under the three perturbations.
DELTA_GRID = [
    (0.875, 0.832, -0.043, -4.8),
    (0.760, 0.830, 0.070, 9.2),
    (0.760, 0.683, -0.077, -10.1),
    (0.878, 0.856, -0.022, -2.5),
    (0.790, 0.760, -0.030, -3.8),
    (0.740, 0.672, -0.068, -9.2),
    (0.835, 0.808, -0.027, -3.2),
    (0.638, 0.640, 0.002, 0.3),
    (0.652, 0.576, -0.076, -11.7),
]


def test_criterion_3_accuracy_delta_grid():
    with criterion(3, "accuracy deltas match the reference grid"):
        for before, after, d_abs, d_rel in DELTA_GRID:
            report = delta_acc(before, after)
            assert report.delta_abs == pytest.approx(d_abs, abs=1e-12)
            assert report.delta_rel == pytest.approx(d_rel, abs=0.2)


def test_criterion_4_reproduction_gate_grid(datadir=None):
    with criterion(4, "two-sigma reproduction gate on the score grid"):
        from pathlib import Path

        with open(Path(__file__).parent / "data" / "table2.json") as fh:
            entries = read_entries(fh)
        report = compare_table(entries)
        assert report.per_setting["in-domain"] == (5, 6)
        assert report.per_setting["cross-domain"] == (4, 6)
        expected = [
            False, True, True, True, True, True,
            True, True, True, False, False, True,
        ]
        assert [v.reproduced for v in report.verdicts] == expected


def test_criterion_5_point_biserial_oracle():
    with criterion(5, "point-biserial equals Pearson, affine-invariant"):
        rng = random.Random(31337)
        checked = 0
        while checked < 1000:
            n = rng.randint(3, 100)
            correct = [rng.random() < 0.5 for _ in range(n)]
            values = [rng.random() for _ in range(n)]
            records = [
                SubpopRecord(f"s{i}", v, c)
                for i, (c, v) in enumerate(zip(correct, values))
            ]
            r = point_biserial(records)
            if r is None:
                assert all(correct) or not any(correct)
                continue
            checked += 1
            expected = np.corrcoef([int(c) for c in correct], values)[0, 1]
            assert r == pytest.approx(expected, abs=1e-9)
            a, b = rng.uniform(0.01, 10), rng.uniform(-10, 10)
            scaled = [
                SubpopRecord(rec.sentence_id, a * rec.continuous_value + b,
                             rec.correct)
                for rec in records
            ]
            assert point_biserial(scaled) == pytest.approx(r, abs=1e-9)


def test_criterion_6_corpus_composition(big_corpus):
    with criterion(6, "synthetic corpus composition statistics"):
        stats = corpus_stats(big_corpus).as_dict()
        assert stats["total"] == 8000
        assert stats["non_arg"] == 3500
        assert stats["arg"] == 4500
        assert stats["non_arg_pct"] == 43.75
        assert stats["arg_pct"] == 56.25
        assert stats["pro_only"] == 658
        assert stats["con_only"] == 621
        assert stats["mixed_stance"] == 3221


def test_criterion_7_generator_invariants(big_corpus):
    with criterion(7, "perturbation generator invariants"):
        t2 = gen_t2(big_corpus, count_per_topic=50, seed=0)
        assert t2
        for p in t2:
            idx = len(p.before_tokens)
            assert p.after_tokens[idx:idx + 3] == CONNECTOR_TOKENS

        t3 = gen_t3(big_corpus, 200, seed=0)
        assert len(t3) == 200
        for p in t3:
            before, after = list(p.before_tokens), list(p.after_tokens)
            assert any(
                before[i:i + len(after)] == after
                for i in range(len(before) - len(after) + 1)
            )
        arg_first = sum(
            1 for p in t3 if p.provenance["order"] == PairOrder.ARG_FIRST.value
        )
        assert abs(2 * arg_first - len(t3)) <= 0.1 * len(t3)
        by_topic = {}
        for p in t3:
            by_topic[p.topic] = by_topic.get(p.topic, 0) + 1
        assert max(by_topic.values()) - min(by_topic.values()) <= 0.1 * len(t3)

        pairs = extract_adjacent_pairs(big_corpus, PairOrder.NONARG_FIRST)
        candidates = gen_t1_candidates(pairs)[:100]
        annotated = [
            dataclasses.replace(
                c, ann_flag=AnnFlag.ANN,
                completion_tokens=("something", "entirely", "neutral"),
            )
            for c in candidates
        ]
        assembled = assemble_t1(annotated)
        assert len(assembled) == len(annotated) > 0
        for p in assembled:
            assert p.gold_before is BinaryLabel.ARG
            assert p.gold_after is BinaryLabel.NON_ARG


def _pipeline(workdir, raw_path):
    """ingest -> baseline -> evaluate -> perturb eval -> subpop t6."""
    workdir.mkdir(parents=True, exist_ok=True)
    runner = CliRunner()

    def run(args):
        result = runner.invoke(main, args)
        assert result.exit_code == 0, f"{args}: {result.output}"

    canonical = workdir / "canonical.jsonl"
    run(["ingest", str(raw_path), "-o", str(canonical)])

    baseline = workdir / "baseline.jsonl"
    run(["baseline", "--corpus", str(canonical), "--scheme", "in-domain",
         "-o", str(baseline)])

    run(["evaluate", "--corpus", str(canonical), "--predictions", str(baseline),
         "--scheme", "in-domain", "--split", "test",
         "-o", str(workdir / "eval.json")])

    t3 = workdir / "t3.jsonl"
    run(["perturb", "t3", "--corpus", str(canonical), "--count", "100",
         "--seed", "0", "-o", str(t3)])
    flat = workdir / "flat_preds.jsonl"
    with open(flat, "w", encoding="utf-8") as fh:
        for line in t3.read_text(encoding="utf-8").splitlines():
            pair_id = json.loads(line)["pair_id"]
            fh.write(json.dumps({
                "sentence_id": pair_id, "run": 0,
                "granularity": "sentence", "label": "ARG",
            }, sort_keys=True) + "\n")
    run(["perturb", "eval", "--pairs", str(t3), "--pred-before", str(flat),
         "--pred-after", str(flat), "-o", str(workdir / "perturb_eval.json")])

    # materialize the in-domain test split so the subpopulation report is
    # scored against exactly the sentences the baseline predicted
    with open(canonical, encoding="utf-8") as fh:
        from argrobust.corpus import parse_corpus

        corpus = parse_corpus(fh)
    assignment = assign_splits(corpus, Scheme.IN_DOMAIN)
    test_split = split_sentences(corpus, assignment, Split.TEST)
    split_path = workdir / "test_split.jsonl"
    with open(split_path, "w", encoding="utf-8") as fh:
        write_corpus(test_split, fh)

    run(["subpop", "t6", "--test-corpus", str(split_path),
         "--predictions", str(baseline), "-o", str(workdir / "t6.json")])

    artifacts = [
        "canonical.jsonl", "baseline.jsonl", "eval.json", "t3.jsonl",
        "flat_preds.jsonl", "perturb_eval.json", "test_split.jsonl", "t6.json",
    ]
    return {name: (workdir / name).read_bytes() for name in artifacts}


def test_criterion_8_end_to_end_determinism(tmp_path):
    with criterion(8, "end-to-end pipeline, twice, byte-identical, < 30 s"):
        raw = tmp_path / "raw.jsonl"
        with open(raw, "w", encoding="utf-8") as fh:
            write_corpus(synthetic_corpus(), fh)
        start = time.perf_counter()
        first = _pipeline(tmp_path / "run1", raw)
        second = _pipeline(tmp_path / "run2", raw)
        elapsed = time.perf_counter() - start
        assert first == second
        assert elapsed < 30.0, f"took {elapsed:.1f}s"
