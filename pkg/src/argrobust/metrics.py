"""Scoring predictions against gold at token, segment and sentence granularity.

Predictions arrive as JSONL, one object per line:

    {"sentence_id": "gc-0001", "run": 0, "granularity": "token",
     "labels": ["CON", "CON", "NON"]}
    {"sentence_id": "gc-0001", "run": 0, "granularity": "sentence",
     "label": "CON"}
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Optional, Sequence

from .corpus import LabeledSentence, Segment, TokenLabel, segmentize
from .labels import (
    BinaryLabel,
    binarize,
    broadcast_sentence_label,
    derive_sentence_label,
)

THREE_CLASS = "3class"
BINARY = "binary"

_VALID_PRED_LABELS = {"PRO", "CON", "NON", "ARG", "NON_ARG"}


class Granularity(str, Enum):
    TOKEN = "token"
    SENTENCE = "sentence"


class PredictionError(ValueError):
    pass


@dataclass(frozen=True)
class PredictionRecord:
    """One model run's output for one sentence.

    Exactly one of token_labels / sentence_label is set, matching the
    granularity.  Labels are kept as raw strings because binary runs may
    legitimately emit ARG / NON_ARG.
    """

    sentence_id: str
    run: int
    granularity: Granularity
    token_labels: Optional[tuple[str, ...]] = None
    sentence_label: Optional[str] = None

    def __post_init__(self):
        if self.granularity is Granularity.TOKEN:
            if self.token_labels is None or self.sentence_label is not None:
                raise PredictionError(
                    f"{self.sentence_id}: token granularity needs 'labels' only"
                )
            bad = [l for l in self.token_labels if l not in _VALID_PRED_LABELS]
        else:
            if self.sentence_label is None or self.token_labels is not None:
                raise PredictionError(
                    f"{self.sentence_id}: sentence granularity needs 'label' only"
                )
            bad = [] if self.sentence_label in _VALID_PRED_LABELS else [self.sentence_label]
        if bad:
            raise PredictionError(f"{self.sentence_id}: unknown labels {bad}")


def read_predictions(source: IO | Iterable[str | bytes]) -> list[PredictionRecord]:
    records = []
    for line_no, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise PredictionError(f"line {line_no}: malformed JSON: {exc}") from exc
        try:
            granularity = Granularity(obj["granularity"])
            record = PredictionRecord(
                sentence_id=obj["sentence_id"],
                run=int(obj.get("run", 0)),
                granularity=granularity,
                token_labels=(
                    tuple(obj["labels"]) if granularity is Granularity.TOKEN else None
                ),
                sentence_label=(
                    obj["label"] if granularity is Granularity.SENTENCE else None
                ),
            )
        except (KeyError, ValueError) as exc:
            raise PredictionError(f"line {line_no}: {exc}") from exc
        records.append(record)
    return records


def group_by_run(
    records: Iterable[PredictionRecord],
) -> dict[int, dict[str, PredictionRecord]]:
    """Index records as run -> sentence_id -> record."""
    runs: dict[int, dict[str, PredictionRecord]] = {}
    for r in records:
        per_run = runs.setdefault(r.run, {})
        if r.sentence_id in per_run:
            raise PredictionError(
                f"duplicate prediction for sentence {r.sentence_id!r} in run {r.run}"
            )
        per_run[r.sentence_id] = r
    return runs


def _as_token_label(raw: str) -> TokenLabel:
    try:
        return TokenLabel(raw)
    except ValueError:
        raise PredictionError(
            f"label {raw!r} is binary-only; 3-class scoring needs PRO/CON/NON"
        ) from None


def _as_binary(raw: str) -> BinaryLabel:
    if raw in ("ARG", "NON_ARG"):
        return BinaryLabel(raw)
    return binarize(TokenLabel(raw))


def predicted_token_labels(
    record: PredictionRecord, n_tokens: int, seed: int = 0
) -> list[TokenLabel]:
    """Token-level view of a prediction; sentence labels are broadcast."""
    if record.granularity is Granularity.TOKEN:
        if len(record.token_labels) != n_tokens:
            raise PredictionError(
                f"{record.sentence_id}: {len(record.token_labels)} predicted "
                f"labels vs {n_tokens} gold tokens"
            )
        return [_as_token_label(l) for l in record.token_labels]
    return broadcast_sentence_label(_as_token_label(record.sentence_label), n_tokens)


def predicted_sentence_label(record: PredictionRecord, seed: int = 0) -> TokenLabel:
    """Sentence-level view; token labels are aggregated by the majority rule."""
    if record.granularity is Granularity.SENTENCE:
        return _as_token_label(record.sentence_label)
    labels = [_as_token_label(l) for l in record.token_labels]
    return derive_sentence_label(labels, seed=seed, key=record.sentence_id)


def predicted_binary_sentence_label(
    record: PredictionRecord, seed: int = 0
) -> BinaryLabel:
    """Binary sentence-level view; accepts ARG/NON_ARG emitting models."""
    if record.granularity is Granularity.SENTENCE:
        return _as_binary(record.sentence_label)
    if all(l in ("ARG", "NON_ARG") for l in record.token_labels):
        # Already binary token labels: ARG wins if any token is ARG-majority
        # equivalent; reuse the majority rule by mapping ARG->PRO.
        mapped = [
            TokenLabel.PRO if l == "ARG" else TokenLabel.NON
            for l in record.token_labels
        ]
        return binarize(derive_sentence_label(mapped, seed=seed, key=record.sentence_id))
    return binarize(predicted_sentence_label(record, seed=seed))


def per_class_f1(
    gold: Sequence, pred: Sequence, cls
) -> Optional[float]:
    """F1 for one class from position-wise counts.

    Returns None when the class occurs in neither gold nor prediction
    (vacuous class, excluded from macro averages upstream); returns 0.0
    when precision + recall is zero.
    """
    if len(gold) != len(pred):
        raise ValueError(f"length mismatch: {len(gold)} gold vs {len(pred)} predicted")
    tp = fp = fn = 0
    for g, p in zip(gold, pred):
        if p == cls and g == cls:
            tp += 1
        elif p == cls:
            fp += 1
        elif g == cls:
            fn += 1
    if tp + fp + fn == 0:
        return None
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def macro_f1(gold: Sequence, pred: Sequence, classes: Sequence) -> float:
    """Unweighted mean of per-class F1 over classes present in gold or pred."""
    scores = [per_class_f1(gold, pred, c) for c in classes]
    scores = [s for s in scores if s is not None]
    if not scores:
        raise ValueError("no class present in either gold or prediction")
    return sum(scores) / len(scores)


def _classes(label_space: str):
    if label_space == THREE_CLASS:
        return (TokenLabel.PRO, TokenLabel.CON, TokenLabel.NON)
    if label_space == BINARY:
        return (BinaryLabel.ARG, BinaryLabel.NON_ARG)
    raise ValueError(f"unknown label space {label_space!r}")


def _check_coverage(corpus, predictions):
    missing = [s.id for s in corpus if s.id not in predictions]
    if missing:
        raise PredictionError(
            f"missing predictions for {len(missing)} sentences "
            f"(first: {missing[:3]})"
        )


def token_f1(
    corpus: list[LabeledSentence],
    predictions: dict[str, PredictionRecord],
    label_space: str = THREE_CLASS,
    seed: int = 0,
) -> float:
    """Macro F1 over all tokens of all sentences, pooled.

    Sentence-granularity predictions are broadcast to every token first.
    """
    _check_coverage(corpus, predictions)
    gold: list = []
    pred: list = []
    for s in corpus:
        p = predicted_token_labels(predictions[s.id], len(s.tokens), seed=seed)
        if label_space == BINARY:
            gold.extend(binarize(l) for l in s.labels)
            pred.extend(binarize(l) for l in p)
        else:
            gold.extend(s.labels)
            pred.extend(p)
    return macro_f1(gold, pred, _classes(label_space))


def sentence_f1(
    corpus: list[LabeledSentence],
    predictions: dict[str, PredictionRecord],
    label_space: str = THREE_CLASS,
    seed: int = 0,
) -> float:
    """Macro F1 over sentences; token predictions are aggregated first."""
    _check_coverage(corpus, predictions)
    gold: list = []
    pred: list = []
    for s in corpus:
        g = derive_sentence_label(s.labels, seed=seed, key=s.id)
        p = predicted_sentence_label(predictions[s.id], seed=seed)
        if label_space == BINARY:
            g, p = binarize(g), binarize(p)
        gold.append(g)
        pred.append(p)
    return macro_f1(gold, pred, _classes(label_space))


def segment_overlap_ratio(segment: Segment, pred_labels: Sequence[TokenLabel]) -> float:
    """Fraction of the gold segment's positions predicted with its label."""
    hits = sum(
        1 for i in range(segment.start, segment.end) if pred_labels[i] == segment.label
    )
    return hits / len(segment)


def sentence_segment_f1(
    sentence: LabeledSentence,
    segments: Sequence[Segment],
    pred_labels: Sequence[TokenLabel],
) -> float:
    """Share of gold PRO/CON segments recovered with overlap ratio > 0.5.

    A sentence with no PRO/CON gold segment scores 1.0 when no PRO/CON
    token is predicted and 0.0 otherwise.
    """
    stance_segments = [s for s in segments if s.label is not TokenLabel.NON]
    if not stance_segments:
        predicted_stance = any(l is not TokenLabel.NON for l in pred_labels)
        return 0.0 if predicted_stance else 1.0
    true = sum(
        1 for seg in stance_segments if segment_overlap_ratio(seg, pred_labels) > 0.5
    )
    return true / len(stance_segments)


def segment_f1(
    corpus: list[LabeledSentence],
    predictions: dict[str, PredictionRecord],
    seed: int = 0,
) -> float:
    """Mean of sentence-wise segment F1 over the evaluation set."""
    _check_coverage(corpus, predictions)
    total = 0.0
    for s in corpus:
        pred = predicted_token_labels(predictions[s.id], len(s.tokens), seed=seed)
        total += sentence_segment_f1(s, segmentize(s), pred)
    return total / len(corpus)


def accuracy(gold: Sequence, pred: Sequence) -> float:
    if len(gold) != len(pred):
        raise ValueError(f"length mismatch: {len(gold)} gold vs {len(pred)} predicted")
    if not gold:
        raise ValueError("empty evaluation set")
    return sum(1 for g, p in zip(gold, pred) if g == p) / len(gold)


@dataclass(frozen=True)
class PerturbationReport:
    acc_before: float
    acc_after: float
    delta_abs: float
    delta_rel: Optional[float]  # percent; None when acc_before == 0

    def as_dict(self) -> dict:
        return {
            "acc_before": self.acc_before,
            "acc_after": self.acc_after,
            "delta_abs": self.delta_abs,
            "delta_rel_pct": self.delta_rel,
        }


def delta_acc(before: float, after: float) -> PerturbationReport:
    """Absolute and relative accuracy change caused by a perturbation."""
    delta = after - before
    rel = 100.0 * delta / before if before > 0 else None
    return PerturbationReport(
        acc_before=before, acc_after=after, delta_abs=delta, delta_rel=rel
    )


@dataclass(frozen=True)
class ScoreDistribution:
    metric_name: str
    values: tuple[float, ...]
    mean: float
    std: float

    def as_dict(self) -> dict:
        return {
            "metric": self.metric_name,
            "values": list(self.values),
            "mean": self.mean,
            "std": self.std,
        }


def aggregate_runs(metric_name: str, values: Sequence[float]) -> ScoreDistribution:
    """Mean and sample (n-1) standard deviation over repeated runs."""
    if not values:
        raise ValueError("no values to aggregate")
    if any(not math.isfinite(v) for v in values):
        raise ValueError("non-finite value in run scores")
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return ScoreDistribution(
        metric_name=metric_name, values=tuple(values), mean=mean, std=std
    )
