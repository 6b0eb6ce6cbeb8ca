"""Export word-vector tables into the plain-text embedding format.

The output is the format the evaluation toolkit's subpopulation analyses
read: a ``"<count> <dim>"`` header line followed by one
``token v1 v2 ... vdim`` line per token.
"""

from __future__ import annotations

from typing import Iterable, Protocol, TextIO

import numpy as np


class VectorBackend(Protocol):
    """Anything that can hand out one fixed-size vector per token."""

    dimension: int

    def vector(self, token: str) -> np.ndarray | None:
        """Vector for a token, or None when the token is out of vocabulary."""


class NpzBackend:
    """Vectors stored in a .npz archive with 'tokens' and 'vectors' arrays."""

    def __init__(self, path):
        data = np.load(path, allow_pickle=False)
        tokens = [str(t) for t in data["tokens"]]
        vectors = np.asarray(data["vectors"], dtype=float)
        if vectors.ndim != 2 or len(tokens) != vectors.shape[0]:
            raise ValueError("'tokens' and 'vectors' shapes do not line up")
        self.dimension = int(vectors.shape[1])
        self._table = dict(zip(tokens, vectors))

    def vector(self, token):
        return self._table.get(token)


class SpacyBackend:
    """Static vectors from an installed spacy pipeline (e.g. en_core_web_lg)."""

    def __init__(self, model_name: str):
        try:
            import spacy
        except ImportError as exc:  # pragma: no cover
            raise ValueError("spacy is not installed") from exc
        try:
            self._nlp = spacy.load(model_name, disable=["parser", "ner"])
        except OSError as exc:  # pragma: no cover
            raise ValueError(f"model {model_name!r} is not available locally") from exc
        self.dimension = int(self._nlp.vocab.vectors_length)

    def vector(self, token):  # pragma: no cover - needs a local model
        lex = self._nlp.vocab[token]
        if not lex.has_vector:
            return None
        return np.asarray(lex.vector, dtype=float)


def export_embeddings(backend: VectorBackend, vocabulary: Iterable[str],
                      stream: TextIO) -> int:
    """Write vectors for every in-vocabulary token; returns tokens written.

    Tokens unknown to the backend are silently dropped (the reader treats
    them as out-of-vocabulary anyway); duplicates keep the first occurrence.
    """
    rows = []
    seen = set()
    for token in vocabulary:
        if token in seen:
            continue
        seen.add(token)
        if not token or any(ch.isspace() for ch in token):
            raise ValueError(f"token {token!r} cannot be written to the text format")
        vec = backend.vector(token)
        if vec is None:
            continue
        if len(vec) != backend.dimension:
            raise ValueError(f"vector for {token!r} has the wrong dimension")
        rows.append((token, vec))
    stream.write(f"{len(rows)} {backend.dimension}\n")
    for token, vec in rows:
        values = " ".join(repr(float(x)) for x in vec)
        stream.write(f"{token} {values}\n")
    return len(rows)
