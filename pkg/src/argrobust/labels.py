"""Label transformations: token->sentence aggregation, broadcast, binarization."""

from __future__ import annotations

import hashlib
from enum import Enum
from typing import Iterable, Sequence

from .corpus import LabeledSentence, Segment, TokenLabel, segmentize


class BinaryLabel(str, Enum):
    ARG = "ARG"
    NON_ARG = "NON_ARG"


def _tie_pick(seed: int, key: str) -> TokenLabel:
    # Keyed hash rather than a shared RNG stream: the outcome for one
    # sentence must not depend on which other sentences are processed.
    h = hashlib.blake2b(
        key.encode("utf-8"),
        key=int(seed).to_bytes(8, "little"),
        digest_size=8,
    )
    bit = h.digest()[0] & 1
    return TokenLabel.PRO if bit == 0 else TokenLabel.CON


def derive_sentence_label(
    labels: Sequence[TokenLabel], seed: int = 0, key: str = ""
) -> TokenLabel:
    """Aggregate token labels into one sentence label.

    Only NON tokens -> NON.  PRO (resp. CON) mixed with NON only -> PRO
    (resp. CON).  With both stances present, the majority by token count
    wins; an exact tie is broken pseudo-randomly but deterministically in
    (seed, key), so reruns and corpus edits cannot flip it.
    """
    if not labels:
        raise ValueError("cannot derive a sentence label from zero tokens")
    f_pro = sum(1 for l in labels if l is TokenLabel.PRO)
    f_con = sum(1 for l in labels if l is TokenLabel.CON)
    if f_pro == 0 and f_con == 0:
        return TokenLabel.NON
    if f_pro > f_con:
        return TokenLabel.PRO
    if f_con > f_pro:
        return TokenLabel.CON
    return _tie_pick(seed, key)


def binarize(label: TokenLabel | BinaryLabel) -> BinaryLabel:
    """Collapse the stance: PRO and CON are ARG, NON is NON_ARG."""
    if isinstance(label, BinaryLabel):
        return label
    return BinaryLabel.NON_ARG if label is TokenLabel.NON else BinaryLabel.ARG


def broadcast_sentence_label(label: TokenLabel, n: int) -> list[TokenLabel]:
    """Assign one sentence label to all n tokens."""
    if n < 1:
        raise ValueError("token count must be >= 1")
    return [label] * n


def is_mixed_segment(
    sentence: LabeledSentence, ignore_punct_only: bool = True
) -> bool:
    """True iff the sentence has both an ARG and a non-ARG segment.

    By default, NON segments formed solely by punctuation do not count as
    non-ARG context (set ignore_punct_only=False to include them).
    """
    segments: Iterable[Segment] = segmentize(sentence)
    has_arg = has_non = False
    for seg in segments:
        if seg.label is TokenLabel.NON:
            if ignore_punct_only and seg.is_punct_only:
                continue
            has_non = True
        else:
            has_arg = True
    return has_arg and has_non
