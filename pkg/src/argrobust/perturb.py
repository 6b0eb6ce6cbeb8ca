"""Construction and evaluation of the before/after perturbation test sets.

Three perturbation families are produced from a segmentized corpus:

  T1  an announcing non-ARG prefix keeps its ARG continuation (before) or
      receives a manually written non-ARG completion (after);
  T2  a stand-alone ARG unit (before) is concatenated with "and besides ,"
      plus a pure non-ARG sentence of the same topic (after);
  T3  an adjacent ARG / non-ARG pair (before) is stripped down to the ARG
      segment alone (after).

The human-in-the-loop steps are file round-trips over the candidate JSONL
schema: the tool emits candidates, a curator edits ann_flag / completion /
approved, and assembly validates before producing final pairs.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import IO, Iterable, Optional, Sequence

from .corpus import LabeledSentence, Segment, TokenLabel, segmentize
from .labels import BinaryLabel
from .metrics import (
    PerturbationReport,
    PredictionRecord,
    PredictionError,
    ScoreDistribution,
    accuracy,
    aggregate_runs,
    delta_acc,
    predicted_binary_sentence_label,
)

log = logging.getLogger(__name__)

CONNECTOR_TOKENS = ("and", "besides", ",")


class PairOrder(str, Enum):
    ARG_FIRST = "arg_first"
    NONARG_FIRST = "nonarg_first"


class AnnFlag(str, Enum):
    ANN = "ANN"
    NON_ANN = "NON_ANN"
    DISCARD = "DISCARD"


@dataclass(frozen=True)
class SegmentPair:
    """An ARG segment and an adjacent non-ARG segment of one sentence."""

    source_sentence_id: str
    topic: str
    arg_span: tuple[int, int]
    arg_tokens: tuple[str, ...]
    nonarg_span: tuple[int, int]
    nonarg_tokens: tuple[str, ...]
    order: PairOrder

    @property
    def pair_id(self) -> str:
        a, b = self.arg_span, self.nonarg_span
        return f"{self.source_sentence_id}:a{a[0]}-{a[1]}:b{b[0]}-{b[1]}"


def extract_adjacent_pairs(
    corpus: Iterable[LabeledSentence], order: Optional[PairOrder] = None
) -> list[SegmentPair]:
    """All adjacent (ARG segment, non-ARG segment) pairs in the corpus.

    Punctuation-only NON segments never serve as the non-ARG side.  Pass
    an order to keep only ARG-first or non-ARG-first pairs.
    """
    pairs = []
    for sentence in corpus:
        segments = segmentize(sentence)
        for left, right in zip(segments, segments[1:]):
            pair = _pair_from_segments(sentence, left, right)
            if pair is not None and (order is None or pair.order is order):
                pairs.append(pair)
    return pairs


def _pair_from_segments(
    sentence: LabeledSentence, left: Segment, right: Segment
) -> Optional[SegmentPair]:
    def tokens(seg):
        return sentence.tokens[seg.start : seg.end]

    if left.label is not TokenLabel.NON and right.label is TokenLabel.NON:
        arg, nonarg, order = left, right, PairOrder.ARG_FIRST
    elif left.label is TokenLabel.NON and right.label is not TokenLabel.NON:
        arg, nonarg, order = right, left, PairOrder.NONARG_FIRST
    else:
        return None
    if nonarg.is_punct_only:
        return None
    return SegmentPair(
        source_sentence_id=sentence.id,
        topic=sentence.topic,
        arg_span=(arg.start, arg.end),
        arg_tokens=tokens(arg),
        nonarg_span=(nonarg.start, nonarg.end),
        nonarg_tokens=tokens(nonarg),
        order=order,
    )


@dataclass(frozen=True)
class PerturbationPair:
    """One row of the candidate / assembled perturbation JSONL."""

    pair_id: str
    test: str  # "T1" | "T2" | "T3"
    topic: str
    before_tokens: tuple[str, ...]
    after_tokens: Optional[tuple[str, ...]]
    gold_before: BinaryLabel
    gold_after: Optional[BinaryLabel]
    ann_flag: Optional[AnnFlag] = None
    completion_tokens: Optional[tuple[str, ...]] = None
    approved: bool = False
    provenance: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "test": self.test,
            "topic": self.topic,
            "before_tokens": list(self.before_tokens),
            "after_tokens": list(self.after_tokens) if self.after_tokens else None,
            "gold_before": self.gold_before.value,
            "gold_after": self.gold_after.value if self.gold_after else None,
            "ann_flag": self.ann_flag.value if self.ann_flag else None,
            "completion_tokens": (
                list(self.completion_tokens) if self.completion_tokens else None
            ),
            "approved": self.approved,
            "provenance": self.provenance,
        }


class PerturbationSchemaError(ValueError):
    pass


def write_pairs(pairs: Iterable[PerturbationPair], stream: IO) -> None:
    for p in pairs:
        stream.write(json.dumps(p.as_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def read_pairs(source: IO | Iterable[str | bytes]) -> list[PerturbationPair]:
    pairs = []
    for line_no, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
            pairs.append(
                PerturbationPair(
                    pair_id=obj["pair_id"],
                    test=obj["test"],
                    topic=obj.get("topic", ""),
                    before_tokens=tuple(obj["before_tokens"]),
                    after_tokens=(
                        tuple(obj["after_tokens"]) if obj.get("after_tokens") else None
                    ),
                    gold_before=BinaryLabel(obj["gold_before"]),
                    gold_after=(
                        BinaryLabel(obj["gold_after"]) if obj.get("gold_after") else None
                    ),
                    ann_flag=(
                        AnnFlag(obj["ann_flag"]) if obj.get("ann_flag") else None
                    ),
                    completion_tokens=(
                        tuple(obj["completion_tokens"])
                        if obj.get("completion_tokens")
                        else None
                    ),
                    approved=bool(obj.get("approved", False)),
                    provenance=obj.get("provenance", {}),
                )
            )
        except (KeyError, ValueError) as exc:
            raise PerturbationSchemaError(f"line {line_no}: {exc}") from exc
    return pairs


def gen_t1_candidates(pairs: Sequence[SegmentPair]) -> list[PerturbationPair]:
    """Candidate rows for the announcing-segment annotation pass.

    Only non-ARG-first pairs qualify: the candidate announcing segment must
    precede the ARG segment it would announce.  ann_flag and completion are
    left empty for the curator.
    """
    candidates = []
    for sp in pairs:
        if sp.order is not PairOrder.NONARG_FIRST:
            continue
        candidates.append(
            PerturbationPair(
                pair_id=f"T1:{sp.pair_id}",
                test="T1",
                topic=sp.topic,
                before_tokens=sp.nonarg_tokens + sp.arg_tokens,
                after_tokens=None,
                gold_before=BinaryLabel.ARG,
                gold_after=None,
                provenance={
                    "source_sentence_id": sp.source_sentence_id,
                    "arg_span": list(sp.arg_span),
                    "nonarg_span": list(sp.nonarg_span),
                    "prefix_len": len(sp.nonarg_tokens),
                },
            )
        )
    return candidates


def assemble_t1(candidates: Sequence[PerturbationPair]) -> list[PerturbationPair]:
    """Turn annotated T1 candidates into final before/after pairs.

    ANN rows must carry a completion; the after side is the announcing
    prefix plus the completion, gold non-ARG.  NON_ANN and DISCARD rows
    are dropped.
    """
    assembled = []
    for row in candidates:
        if row.ann_flag is not AnnFlag.ANN:
            continue
        if not row.completion_tokens:
            raise PerturbationSchemaError(
                f"{row.pair_id}: ANN row without completion tokens"
            )
        prefix_len = row.provenance.get("prefix_len")
        if prefix_len is None:
            raise PerturbationSchemaError(
                f"{row.pair_id}: missing prefix_len in provenance"
            )
        prefix = row.before_tokens[:prefix_len]
        original_arg = row.before_tokens[prefix_len:]
        if tuple(row.completion_tokens) == tuple(original_arg):
            raise PerturbationSchemaError(
                f"{row.pair_id}: completion is identical to the original ARG segment"
            )
        assembled.append(
            replace(
                row,
                after_tokens=prefix + row.completion_tokens,
                gold_after=BinaryLabel.NON_ARG,
                approved=True,
            )
        )
    if not assembled:
        log.warning("no ANN rows: assembled T1 set is empty")
    return assembled


def _full_sentence_arg_units(corpus: Iterable[LabeledSentence]) -> list[LabeledSentence]:
    # ARG units that are full stand-alone sentences: every segment is
    # PRO/CON except punctuation-only NON runs.
    units = []
    for s in corpus:
        segs = segmentize(s)
        stance = [g for g in segs if g.label is not TokenLabel.NON]
        rest_ok = all(
            g.is_punct_only for g in segs if g.label is TokenLabel.NON
        )
        if stance and rest_ok:
            units.append(s)
    return units


def _pure_nonarg_sentences(corpus: Iterable[LabeledSentence]) -> list[LabeledSentence]:
    return [s for s in corpus if all(l is TokenLabel.NON for l in s.labels)]


def gen_t2(
    corpus: list[LabeledSentence],
    count_per_topic: int,
    seed: int = 0,
    topics: Optional[Sequence[str]] = None,
) -> list[PerturbationPair]:
    """Candidate pairs concatenating an ARG unit with a non-ARG sentence.

    after = ARG unit + "and besides ," + pure non-ARG sentence of the same
    topic; before = the ARG unit alone; both gold ARG.  Sampling is uniform
    without replacement and seed-deterministic.  Rows await the curator's
    approved flag.
    """
    if topics is None:
        topics = sorted({s.topic for s in corpus})
    rng = random.Random(seed)
    out = []
    for topic in topics:
        topic_sents = [s for s in corpus if s.topic == topic]
        args = _full_sentence_arg_units(topic_sents)
        nonargs = _pure_nonarg_sentences(topic_sents)
        if count_per_topic == 0:
            continue
        if not nonargs:
            raise ValueError(f"topic {topic!r} has no pure non-ARG sentences")
        if not args:
            raise ValueError(f"topic {topic!r} has no stand-alone ARG sentences")
        k = min(count_per_topic, len(args), len(nonargs))
        picked_args = rng.sample(args, k)
        picked_non = rng.sample(nonargs, k)
        for a, n in zip(picked_args, picked_non):
            out.append(
                PerturbationPair(
                    pair_id=f"T2:{a.id}+{n.id}",
                    test="T2",
                    topic=topic,
                    before_tokens=a.tokens,
                    after_tokens=a.tokens + CONNECTOR_TOKENS + n.tokens,
                    gold_before=BinaryLabel.ARG,
                    gold_after=BinaryLabel.ARG,
                    provenance={"arg_sentence_id": a.id, "nonarg_sentence_id": n.id},
                )
            )
    return out


def gen_t3(
    corpus: list[LabeledSentence],
    count: int,
    seed: int = 0,
    topics: Optional[Sequence[str]] = None,
    balance_tolerance: float = 0.1,
) -> list[PerturbationPair]:
    """Candidate pairs removing the non-ARG context around an ARG segment.

    before = the adjacent ARG + non-ARG span; after = the ARG segment
    alone; both gold ARG.  The sample is balanced ~50/50 over segment order
    and over the given topics; imbalance beyond balance_tolerance * count
    is an error.
    """
    pairs = extract_adjacent_pairs(corpus)
    if topics is None:
        topics = sorted({p.topic for p in pairs})
    rng = random.Random(seed)
    cells: dict[tuple[str, PairOrder], list[SegmentPair]] = {
        (t, o): [] for t in topics for o in PairOrder
    }
    for p in pairs:
        if (p.topic, p.order) in cells:
            cells[(p.topic, p.order)].append(p)
    n_cells = len(cells)
    quotas = {key: count // n_cells for key in cells}
    for i, key in enumerate(sorted(cells, key=lambda k: (k[0], k[1].value))):
        if i < count % n_cells:
            quotas[key] += 1
    chosen: list[SegmentPair] = []
    for key in sorted(cells, key=lambda k: (k[0], k[1].value)):
        pool = cells[key]
        k = min(quotas[key], len(pool))
        chosen.extend(rng.sample(pool, k))
    if chosen:
        total = len(chosen)
        by_order = {
            o: sum(1 for p in chosen if p.order is o) for o in PairOrder
        }
        if abs(by_order[PairOrder.ARG_FIRST] - by_order[PairOrder.NONARG_FIRST]) > (
            balance_tolerance * total
        ):
            raise ValueError(
                "cannot satisfy the order balance: "
                f"{by_order[PairOrder.ARG_FIRST]} ARG-first vs "
                f"{by_order[PairOrder.NONARG_FIRST]} non-ARG-first"
            )
        for t in topics:
            share = sum(1 for p in chosen if p.topic == t)
            if abs(share - total / len(topics)) > balance_tolerance * total:
                raise ValueError(f"cannot satisfy the topic balance for {t!r}")
    out = []
    for sp in chosen:
        if sp.order is PairOrder.ARG_FIRST:
            before = sp.arg_tokens + sp.nonarg_tokens
        else:
            before = sp.nonarg_tokens + sp.arg_tokens
        out.append(
            PerturbationPair(
                pair_id=f"T3:{sp.pair_id}",
                test="T3",
                topic=sp.topic,
                before_tokens=before,
                after_tokens=sp.arg_tokens,
                gold_before=BinaryLabel.ARG,
                gold_after=BinaryLabel.ARG,
                provenance={
                    "source_sentence_id": sp.source_sentence_id,
                    "arg_span": list(sp.arg_span),
                    "nonarg_span": list(sp.nonarg_span),
                    "order": sp.order.value,
                },
            )
        )
    return out


@dataclass(frozen=True)
class PerturbationEvaluation:
    per_run: dict[int, PerturbationReport]
    before: ScoreDistribution
    after: ScoreDistribution
    delta_abs: ScoreDistribution

    def as_dict(self) -> dict:
        return {
            "per_run": {str(r): rep.as_dict() for r, rep in sorted(self.per_run.items())},
            "acc_before": self.before.as_dict(),
            "acc_after": self.after.as_dict(),
            "delta_abs": self.delta_abs.as_dict(),
            "mean_delta": delta_acc(self.before.mean, self.after.mean).as_dict(),
        }


def eval_perturbation(
    pairs: Sequence[PerturbationPair],
    predictions_before: dict[int, dict[str, PredictionRecord]],
    predictions_after: dict[int, dict[str, PredictionRecord]],
    seed: int = 0,
) -> PerturbationEvaluation:
    """Accuracy before/after and the resulting deltas, per run and aggregated.

    Predictions are keyed run -> pair_id; token-granularity records are
    reduced to a binary sentence label first.
    """
    pairs = [p for p in pairs if p.after_tokens is not None]
    if not pairs:
        raise ValueError("no complete pairs to evaluate")
    runs = sorted(predictions_before)
    if runs != sorted(predictions_after):
        raise PredictionError("before/after prediction files cover different runs")
    per_run = {}
    for run in runs:
        gold_b, gold_a, pred_b, pred_a = [], [], [], []
        for p in pairs:
            for side, preds, gold, pred in (
                ("before", predictions_before[run], gold_b, pred_b),
                ("after", predictions_after[run], gold_a, pred_a),
            ):
                record = preds.get(p.pair_id)
                if record is None:
                    raise PredictionError(
                        f"run {run}: missing {side} prediction for {p.pair_id}"
                    )
                gold.append(p.gold_before if side == "before" else p.gold_after)
                pred.append(predicted_binary_sentence_label(record, seed=seed))
        per_run[run] = delta_acc(accuracy(gold_b, pred_b), accuracy(gold_a, pred_a))
    return PerturbationEvaluation(
        per_run=per_run,
        before=aggregate_runs("acc_before", [per_run[r].acc_before for r in runs]),
        after=aggregate_runs("acc_after", [per_run[r].acc_after for r in runs]),
        delta_abs=aggregate_runs("delta_abs", [per_run[r].delta_abs for r in runs]),
    )
