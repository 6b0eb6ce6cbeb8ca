"""Token-labeled argument corpora: parsing, segmentation, splits, dedup, stats.

The canonical on-disk format is JSONL with one object per line:

    {"id": "gc-0001", "topic": "gun control",
     "tokens": ["Guns", "kill", "."], "labels": ["CON", "CON", "NON"]}
"""

from __future__ import annotations

import json
import logging
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Iterator

log = logging.getLogger(__name__)

AURC8_TOPICS = (
    "abortion",
    "cloning",
    "marijuana legalization",
    "minimum wage",
    "nuclear energy",
    "death penalty",
    "gun control",
    "school uniforms",
)


class TokenLabel(str, Enum):
    PRO = "PRO"
    CON = "CON"
    NON = "NON"


class Split(str, Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


class Scheme(str, Enum):
    IN_DOMAIN = "in-domain"
    CROSS_DOMAIN = "cross-domain"


class CorpusFormatError(ValueError):
    """Raised for malformed corpus input; carries the offending line number."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


@dataclass(frozen=True)
class LabeledSentence:
    """One pre-tokenized sentence with a label per token.

    ``position`` is the 0-based order of the sentence within its topic,
    assigned in file order at parse time.
    """

    id: str
    topic: str
    position: int
    tokens: tuple[str, ...]
    labels: tuple[TokenLabel, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.labels):
            raise CorpusFormatError(
                f"sentence {self.id!r}: {len(self.tokens)} tokens "
                f"vs {len(self.labels)} labels"
            )
        if not self.tokens:
            raise CorpusFormatError(f"sentence {self.id!r}: empty token list")
        if any(not t for t in self.tokens):
            raise CorpusFormatError(f"sentence {self.id!r}: empty token")


@dataclass(frozen=True)
class Segment:
    """Maximal run of adjacent tokens sharing one label, [start, end)."""

    label: TokenLabel
    start: int
    end: int
    is_punct_only: bool

    def __len__(self):
        return self.end - self.start


@dataclass
class SplitAssignment:
    scheme: Scheme
    map: dict[str, Split] = field(default_factory=dict)


def is_punct_token(token: str) -> bool:
    """True iff every character is in a Unicode punctuation category."""
    return all(unicodedata.category(ch).startswith("P") for ch in token)


def segmentize(sentence: LabeledSentence) -> list[Segment]:
    """Split a sentence into maximal same-label runs.

    The returned segments partition [0, len(tokens)); adjacent segments
    carry different labels.
    """
    segments = []
    start = 0
    labels = sentence.labels
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            punct = all(is_punct_token(t) for t in sentence.tokens[start:i])
            segments.append(Segment(labels[start], start, i, punct))
            start = i
    return segments


def parse_corpus_lenient(
    source: IO | Iterable[str | bytes],
    topics: tuple[str, ...] = AURC8_TOPICS,
) -> tuple[list[LabeledSentence], list[CorpusFormatError]]:
    """Parse canonical JSONL, collecting per-line errors instead of raising.

    Order is preserved; positions are assigned per topic in file order;
    lines with errors are skipped and reported.
    """
    corpus: list[LabeledSentence] = []
    errors: list[CorpusFormatError] = []
    seen_ids: set[str] = set()
    positions: dict[str, int] = {}
    n_lines = 0
    for line_no, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        if not raw.strip():
            continue
        n_lines += 1
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            errors.append(CorpusFormatError(f"malformed JSON: {exc}", line_no))
            continue
        try:
            if not isinstance(obj, dict):
                raise CorpusFormatError("expected a JSON object")
            missing = {"id", "topic", "tokens", "labels"} - obj.keys()
            if missing:
                raise CorpusFormatError(f"missing fields {sorted(missing)}")
            sid = obj["id"]
            if sid in seen_ids:
                raise CorpusFormatError(f"duplicate id {sid!r}")
            topic = obj["topic"]
            if topic not in topics:
                raise CorpusFormatError(f"unknown topic {topic!r}")
            try:
                labels = tuple(TokenLabel(v) for v in obj["labels"])
            except ValueError as exc:
                raise CorpusFormatError(f"unknown label: {exc}") from exc
            sentence = LabeledSentence(
                id=sid,
                topic=topic,
                position=positions.get(topic, 0),
                tokens=tuple(obj["tokens"]),
                labels=labels,
            )
        except CorpusFormatError as exc:
            errors.append(CorpusFormatError(str(exc), line_no))
            continue
        positions[topic] = positions.get(topic, 0) + 1
        seen_ids.add(sid)
        corpus.append(sentence)
    if n_lines == 0:
        log.warning("empty corpus stream")
    return corpus, errors


def parse_corpus(
    source: IO | Iterable[str | bytes],
    topics: tuple[str, ...] = AURC8_TOPICS,
) -> list[LabeledSentence]:
    """Strict variant of parse_corpus_lenient: the first error raises."""
    corpus, errors = parse_corpus_lenient(source, topics)
    if errors:
        raise errors[0]
    return corpus


def write_corpus(corpus: Iterable[LabeledSentence], stream: IO) -> None:
    """Write a corpus in the canonical JSONL format."""
    for s in corpus:
        obj = {
            "id": s.id,
            "topic": s.topic,
            "tokens": list(s.tokens),
            "labels": [l.value for l in s.labels],
        }
        stream.write(json.dumps(obj, ensure_ascii=False) + "\n")


def assign_splits(
    corpus: list[LabeledSentence],
    scheme: Scheme,
    topics: tuple[str, ...] = AURC8_TOPICS,
) -> SplitAssignment:
    """Assign train/dev/test per the fixed in-domain or cross-domain scheme.

    In-domain: within each of the first six topics (by registry order),
    sentences ordered by position go 70% train / 10% dev / 20% test, with
    cut points floor(0.7*n) and floor(0.8*n).  Sentences from the last two
    topics are left unassigned with a warning.

    Cross-domain: topics 1-5 train, topic 6 dev, topics 7-8 test.
    """
    assignment = SplitAssignment(scheme=scheme)
    by_topic: dict[str, list[LabeledSentence]] = {t: [] for t in topics}
    for s in corpus:
        by_topic[s.topic].append(s)
    if scheme is Scheme.IN_DOMAIN:
        for topic in topics[:6]:
            group = sorted(by_topic[topic], key=lambda s: s.position)
            n = len(group)
            cut_train = int(n * 0.7)
            cut_dev = int(n * 0.8)
            for i, s in enumerate(group):
                if i < cut_train:
                    assignment.map[s.id] = Split.TRAIN
                elif i < cut_dev:
                    assignment.map[s.id] = Split.DEV
                else:
                    assignment.map[s.id] = Split.TEST
        unassigned = sum(len(by_topic[t]) for t in topics[6:])
        if unassigned:
            log.warning(
                "in-domain scheme leaves %d sentences from topics %s unassigned",
                unassigned,
                list(topics[6:]),
            )
    elif scheme is Scheme.CROSS_DOMAIN:
        split_of_topic = {}
        for t in topics[:5]:
            split_of_topic[t] = Split.TRAIN
        split_of_topic[topics[5]] = Split.DEV
        for t in topics[6:]:
            split_of_topic[t] = Split.TEST
        for s in corpus:
            assignment.map[s.id] = split_of_topic[s.topic]
    else:  # pragma: no cover
        raise ValueError(f"unknown scheme {scheme!r}")
    return assignment


@dataclass(frozen=True)
class DuplicateRemoval:
    dropped_id: str
    kept_id: str


def deduplicate(
    corpus: list[LabeledSentence],
    assignment: SplitAssignment,
    topics: tuple[str, ...] = AURC8_TOPICS,
) -> tuple[list[LabeledSentence], SplitAssignment, list[DuplicateRemoval]]:
    """Drop sentences whose token sequence duplicates an earlier one.

    Duplicates are detected within and across the splits of one scheme;
    comparison is exact, case-sensitive string equality of the token
    sequence.  The earliest occurrence in (topic registry order, position)
    order is kept.  Unassigned sentences are left untouched.
    """
    topic_index = {t: i for i, t in enumerate(topics)}
    assigned = [s for s in corpus if s.id in assignment.map]
    assigned.sort(key=lambda s: (topic_index[s.topic], s.position))
    kept_by_tokens: dict[tuple[str, ...], str] = {}
    removals: list[DuplicateRemoval] = []
    dropped: set[str] = set()
    for s in assigned:
        earlier = kept_by_tokens.get(s.tokens)
        if earlier is None:
            kept_by_tokens[s.tokens] = s.id
        else:
            removals.append(DuplicateRemoval(dropped_id=s.id, kept_id=earlier))
            dropped.add(s.id)
    new_corpus = [s for s in corpus if s.id not in dropped]
    new_assignment = SplitAssignment(
        scheme=assignment.scheme,
        map={k: v for k, v in assignment.map.items() if k not in dropped},
    )
    return new_corpus, new_assignment, removals


@dataclass(frozen=True)
class CorpusStats:
    total: int
    arg: int
    non_arg: int
    pro_only: int
    con_only: int
    mixed_stance: int

    def as_dict(self) -> dict:
        def pct(x, whole):
            return round(100.0 * x / whole, 2) if whole else 0.0

        return {
            "total": self.total,
            "arg": self.arg,
            "arg_pct": pct(self.arg, self.total),
            "non_arg": self.non_arg,
            "non_arg_pct": pct(self.non_arg, self.total),
            "pro_only": self.pro_only,
            "pro_only_pct": pct(self.pro_only, self.arg),
            "con_only": self.con_only,
            "con_only_pct": pct(self.con_only, self.arg),
            "mixed_stance": self.mixed_stance,
            "mixed_stance_pct": pct(self.mixed_stance, self.arg),
        }


def corpus_stats(corpus: list[LabeledSentence]) -> CorpusStats:
    """Sentence-level composition of a corpus.

    A sentence is ARG when it contains at least one PRO or CON token.
    Among ARG sentences, "exclusively PRO" / "exclusively CON" ignores
    NON segments made up solely of punctuation tokens.
    """
    arg = pro_only = con_only = mixed = 0
    for s in corpus:
        present = set(s.labels)
        if not (TokenLabel.PRO in present or TokenLabel.CON in present):
            continue
        arg += 1
        effective = {
            seg.label
            for seg in segmentize(s)
            if not (seg.label is TokenLabel.NON and seg.is_punct_only)
        }
        if effective == {TokenLabel.PRO}:
            pro_only += 1
        elif effective == {TokenLabel.CON}:
            con_only += 1
        else:
            mixed += 1
    return CorpusStats(
        total=len(corpus),
        arg=arg,
        non_arg=len(corpus) - arg,
        pro_only=pro_only,
        con_only=con_only,
        mixed_stance=mixed,
    )


def split_sentences(
    corpus: list[LabeledSentence], assignment: SplitAssignment, split: Split
) -> list[LabeledSentence]:
    """Sentences of one split, in corpus order."""
    return [s for s in corpus if assignment.map.get(s.id) is split]
