"""Subpopulation analyses: train/test similarity and argumentative token ratio
correlated with prediction correctness via the point-biserial coefficient."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import IO, Optional, Sequence

import numpy as np

from .corpus import LabeledSentence, TokenLabel
from .labels import BinaryLabel, binarize, derive_sentence_label, is_mixed_segment
from .metrics import (
    PredictionRecord,
    ScoreDistribution,
    aggregate_runs,
    predicted_binary_sentence_label,
)

log = logging.getLogger(__name__)

OOV_SKIP = "skip"
OOV_ZERO = "zero"


class LabelRelation(str, Enum):
    SAME = "same"  # nearest train neighbor shares the test label -> T4
    OPPOSITE = "opposite"  # nearest train neighbor has the opposite label -> T5


@dataclass
class EmbeddingTable:
    dimension: int
    entries: dict[str, np.ndarray]

    def __contains__(self, token):
        return token in self.entries


def load_embeddings(stream: IO) -> EmbeddingTable:
    """Read the text embedding format: "<count> <dim>" then one token per line."""
    header = stream.readline().split()
    if len(header) != 2:
        raise ValueError("embedding file must start with '<count> <dimension>'")
    count, dim = int(header[0]), int(header[1])
    entries: dict[str, np.ndarray] = {}
    for line in stream:
        parts = line.rstrip("\n").split(" ")
        if len(parts) < 2:
            continue
        token = parts[0]
        vec = np.asarray([float(x) for x in parts[1:]], dtype=np.float64)
        if vec.shape[0] != dim:
            raise ValueError(
                f"token {token!r}: {vec.shape[0]} components, expected {dim}"
            )
        entries[token] = vec
    if len(entries) != count:
        log.warning("embedding header says %d tokens, file has %d", count, len(entries))
    return EmbeddingTable(dimension=dim, entries=entries)


def sentence_vector(
    tokens: Sequence[str], table: EmbeddingTable, oov: str = OOV_SKIP
) -> tuple[np.ndarray, int]:
    """Mean of the tokens' vectors; returns (vector, number of tokens found).

    With oov="skip", out-of-vocabulary tokens are dropped from the average;
    with oov="zero", they contribute zero vectors (the upstream library's
    behavior).  An all-OOV sentence yields the zero vector and found == 0.
    """
    if not table.entries:
        raise ValueError("empty embedding table")
    found = [table.entries[t] for t in tokens if t in table.entries]
    if not found:
        return np.zeros(table.dimension), 0
    total = np.sum(found, axis=0)
    denom = len(tokens) if oov == OOV_ZERO else len(found)
    return total / denom, len(found)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> Optional[float]:
    """u.v / (|u||v|), clamped to [-1, 1]; None for a zero-norm input."""
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return None
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


@dataclass(frozen=True)
class SubpopRecord:
    sentence_id: str
    continuous_value: float
    correct: bool


@dataclass(frozen=True)
class SimilaritySets:
    """Per-relation membership of the eligible test sentences.

    same/opposite map sentence id -> max cosine over the training set;
    membership follows the gold binary label of the nearest train sentence.
    Zero-vector sentences on either side are excluded and counted.
    """

    same: dict[str, float]
    opposite: dict[str, float]
    excluded_zero_vector: int


def nearest_train_similarity(
    test_sentences: Sequence[LabeledSentence],
    train_sentences: Sequence[LabeledSentence],
    table: EmbeddingTable,
    seed: int = 0,
    oov: str = OOV_SKIP,
) -> SimilaritySets:
    """Max cosine against the whole training set, split by neighbor label.

    Eligible test sentences are the mixed-segment ones (gold ARG by
    construction).  Argmax ties break toward the smaller train sentence id.
    """
    if not train_sentences:
        raise ValueError("empty training corpus")
    train = sorted(train_sentences, key=lambda s: s.id)
    vectors = []
    labels = []
    kept_rows = 0
    excluded = 0
    for s in train:
        vec, n_found = sentence_vector(s.tokens, table, oov=oov)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            excluded += 1
            continue
        vectors.append(vec / norm)
        labels.append(
            binarize(derive_sentence_label(s.labels, seed=seed, key=s.id))
        )
        kept_rows += 1
    if kept_rows == 0:
        raise ValueError("every training sentence maps to the zero vector")
    matrix = np.vstack(vectors)
    same: dict[str, float] = {}
    opposite: dict[str, float] = {}
    for s in test_sentences:
        if not is_mixed_segment(s):
            continue
        vec, n_found = sentence_vector(s.tokens, table, oov=oov)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            excluded += 1
            continue
        sims = matrix @ (vec / norm)
        best = int(np.argmax(sims))  # first max: train rows sorted by id
        coefficient = float(np.clip(sims[best], -1.0, 1.0))
        if labels[best] is BinaryLabel.ARG:
            same[s.id] = coefficient
        else:
            opposite[s.id] = coefficient
    return SimilaritySets(same=same, opposite=opposite, excluded_zero_vector=excluded)


def build_similarity_set(
    test_sentences: Sequence[LabeledSentence],
    train_sentences: Sequence[LabeledSentence],
    predictions: dict[str, PredictionRecord],
    relation: LabelRelation,
    table: EmbeddingTable,
    seed: int = 0,
    oov: str = OOV_SKIP,
) -> list[SubpopRecord]:
    """Similarity subpopulation records for one run and one relation."""
    sets = nearest_train_similarity(
        test_sentences, train_sentences, table, seed=seed, oov=oov
    )
    members = sets.same if relation is LabelRelation.SAME else sets.opposite
    return _records_for(test_sentences, members, predictions, seed)


def arg_token_ratio(sentence: LabeledSentence) -> float:
    """Share of PRO/CON tokens among all tokens of the sentence."""
    if not sentence.tokens:
        raise ValueError("empty sentence")
    n_arg = sum(1 for l in sentence.labels if l is not TokenLabel.NON)
    return n_arg / len(sentence.labels)


def _records_for(
    test_sentences: Sequence[LabeledSentence],
    values: dict[str, float],
    predictions: dict[str, PredictionRecord],
    seed: int,
) -> list[SubpopRecord]:
    records = []
    for s in test_sentences:
        if s.id not in values:
            continue
        gold = binarize(derive_sentence_label(s.labels, seed=seed, key=s.id))
        pred = predicted_binary_sentence_label(predictions[s.id], seed=seed)
        records.append(
            SubpopRecord(
                sentence_id=s.id,
                continuous_value=values[s.id],
                correct=(pred is gold),
            )
        )
    return records


def point_biserial(records: Sequence[SubpopRecord]) -> Optional[float]:
    """Point-biserial correlation between correctness and the continuous value.

    r = ((M1 - M0) / s_n) * sqrt(p * q) with the population (n-denominator)
    standard deviation; numerically identical to the Pearson correlation of
    the 0/1 series with the values.  Returns None when one correctness
    group is empty or the values have zero variance.
    """
    n = len(records)
    group1 = [r.continuous_value for r in records if r.correct]
    group0 = [r.continuous_value for r in records if not r.correct]
    if not group1 or not group0:
        return None
    values = [r.continuous_value for r in records]
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    if var == 0.0:
        return None
    m1 = sum(group1) / len(group1)
    m0 = sum(group0) / len(group0)
    p = len(group1) / n
    q = len(group0) / n
    r = ((m1 - m0) / math.sqrt(var)) * math.sqrt(p * q)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class SubpopReport:
    test_id: str  # "T4" | "T5" | "T6"
    per_run: dict[int, Optional[float]]
    set_sizes: dict[int, int]
    distribution: Optional[ScoreDistribution]  # None when every run is degenerate

    def as_dict(self) -> dict:
        return {
            "test": self.test_id,
            "per_run": {str(k): v for k, v in sorted(self.per_run.items())},
            "set_sizes": {str(k): v for k, v in sorted(self.set_sizes.items())},
            "r_pb": self.distribution.as_dict() if self.distribution else None,
        }


def run_subpop(
    test_id: str,
    test_sentences: Sequence[LabeledSentence],
    train_sentences: Optional[Sequence[LabeledSentence]],
    predictions_by_run: dict[int, dict[str, PredictionRecord]],
    table: Optional[EmbeddingTable] = None,
    seed: int = 0,
    oov: str = OOV_SKIP,
) -> SubpopReport:
    """One subpopulation test over all runs.

    T4/T5 need train_sentences and an embedding table; T6 uses the
    argumentative token ratio and needs neither.
    """
    if test_id in ("T4", "T5"):
        if table is None or train_sentences is None:
            raise ValueError(f"{test_id} needs a training corpus and embeddings")
        sets = nearest_train_similarity(
            test_sentences, train_sentences, table, seed=seed, oov=oov
        )
        values = sets.same if test_id == "T4" else sets.opposite
    elif test_id == "T6":
        values = {
            s.id: arg_token_ratio(s) for s in test_sentences if is_mixed_segment(s)
        }
    else:
        raise ValueError(f"unknown subpopulation test {test_id!r}")
    per_run: dict[int, Optional[float]] = {}
    sizes: dict[int, int] = {}
    for run, predictions in sorted(predictions_by_run.items()):
        records = _records_for(test_sentences, values, predictions, seed)
        sizes[run] = len(records)
        per_run[run] = point_biserial(records)
    defined = [v for v in per_run.values() if v is not None]
    distribution = aggregate_runs(f"{test_id}_r_pb", defined) if defined else None
    return SubpopReport(
        test_id=test_id, per_run=per_run, set_sizes=sizes, distribution=distribution
    )
