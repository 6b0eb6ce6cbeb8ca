"""Convert subword-level classifier outputs into the predictions JSONL format.

Transformer token classifiers label subword pieces; the evaluation toolkit
scores word-level tokens.  The bridge is an alignment map plus the
first-subword convention: a word's label is the label of its first subword.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Sequence, TextIO

VALID_LABELS = ("PRO", "CON", "NON")


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class AlignmentMap:
    """word index -> ordered subword indices, first subword carrying the label.

    Special subwords (CLS/SEP/pad positions) are simply absent from the map.
    """

    word_to_subwords: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen = set()
        for word_idx, subwords in enumerate(self.word_to_subwords):
            if not subwords:
                raise AlignmentError(f"word {word_idx} has no subwords")
            if list(subwords) != sorted(subwords):
                raise AlignmentError(f"word {word_idx} subwords are unordered")
            overlap = seen.intersection(subwords)
            if overlap:
                raise AlignmentError(f"subword {min(overlap)} assigned twice")
            seen.update(subwords)

    @property
    def n_words(self) -> int:
        return len(self.word_to_subwords)

    def first_subword(self, word_idx: int) -> int:
        return self.word_to_subwords[word_idx][0]

    def check_covers(self, n_subwords: int, special: Sequence[int] = ()) -> None:
        """Every non-special subword index below n_subwords must be mapped."""
        mapped = {i for sw in self.word_to_subwords for i in sw}
        missing = set(range(n_subwords)) - mapped - set(special)
        if missing:
            raise AlignmentError(f"unmapped subwords: {sorted(missing)}")


def project_token_labels(subword_labels: Sequence[str],
                         alignment: AlignmentMap) -> list[str]:
    """Word labels via the first-subword convention.

    Words whose first subword fell beyond the encoder's truncation point get
    NON (with a warning), so the output always has one label per word.
    """
    out = []
    truncated = 0
    for word_idx in range(alignment.n_words):
        first = alignment.first_subword(word_idx)
        if first >= len(subword_labels):
            out.append("NON")
            truncated += 1
            continue
        label = subword_labels[first]
        if label not in VALID_LABELS:
            raise ValueError(f"label {label!r} is not one of {VALID_LABELS}")
        out.append(label)
    if truncated:
        warnings.warn(
            f"{truncated} word(s) beyond the encoder limit filled with NON",
            stacklevel=2,
        )
    return out


def token_record(sentence_id: str, run: int, subword_labels: Sequence[str],
                 alignment: AlignmentMap) -> dict:
    return {
        "sentence_id": sentence_id,
        "run": run,
        "granularity": "token",
        "labels": project_token_labels(subword_labels, alignment),
    }


def sentence_record(sentence_id: str, run: int, label: str) -> dict:
    if label not in VALID_LABELS:
        raise ValueError(f"label {label!r} is not one of {VALID_LABELS}")
    return {
        "sentence_id": sentence_id,
        "run": run,
        "granularity": "sentence",
        "label": label,
    }


def convert_predictions(outputs, alignments: dict[str, AlignmentMap],
                        stream: TextIO) -> int:
    """Write one prediction line per model output; returns lines written.

    ``outputs`` iterates over dicts with sentence_id/run and either
    ``subword_labels`` (token granularity) or ``label`` (sentence
    granularity).  Token outputs need an alignment for their sentence.
    """
    n = 0
    seen = set()
    for out in outputs:
        sid, run = out["sentence_id"], int(out["run"])
        if (sid, run) in seen:
            raise ValueError(f"more than one output for {sid!r} in run {run}")
        seen.add((sid, run))
        if "subword_labels" in out:
            if sid not in alignments:
                raise AlignmentError(f"no alignment for sentence {sid!r}")
            record = token_record(sid, run, out["subword_labels"], alignments[sid])
        elif "label" in out:
            record = sentence_record(sid, run, out["label"])
        else:
            raise ValueError(f"output for {sid!r} has neither labels nor label")
        stream.write(json.dumps(record, sort_keys=True) + "\n")
        n += 1
    return n


def read_alignments(stream) -> dict[str, AlignmentMap]:
    """JSONL of {"sentence_id": ..., "word_to_subwords": [[...], ...]}."""
    maps = {}
    for line in stream:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        maps[obj["sentence_id"]] = AlignmentMap(
            tuple(tuple(int(i) for i in sw) for sw in obj["word_to_subwords"])
        )
    return maps
