"""Shared synthetic corpora and independent oracle implementations.

The big synthetic corpus mirrors the published composition of the 8-topic
benchmark: 8,000 sentences, 1,000 per topic, with sentence-level counts
3,500 / 4,500 split into 658 exclusively-PRO, 621 exclusively-CON and
3,221 mixed-stance argumentative sentences.
"""

from __future__ import annotations

from argrobust.corpus import AURC8_TOPICS, LabeledSentence, TokenLabel

PRO, CON, NON = TokenLabel.PRO, TokenLabel.CON, TokenLabel.NON

NON_ARG_TOTAL = 3500
PRO_ONLY_TOTAL = 658
CON_ONLY_TOTAL = 621
MIXED_TOTAL = 3221


def sent(sid, topic, position, tokens, labels) -> LabeledSentence:
    return LabeledSentence(
        id=sid, topic=topic, position=position,
        tokens=tuple(tokens), labels=tuple(labels),
    )


def _distribute(total: int, extras_at: list[int]) -> list[int]:
    base = total // 8
    rem = total - base * 8
    assert rem == len(extras_at)
    quotas = [base] * 8
    for t in extras_at:
        quotas[t] += 1
    return quotas


def synthetic_corpus() -> list[LabeledSentence]:
    """8,000 unique sentences matching the published per-category counts."""
    non_q = _distribute(NON_ARG_TOTAL, [0, 1, 2, 3])
    pro_q = _distribute(PRO_ONLY_TOTAL, [4, 5])
    con_q = _distribute(CON_ONLY_TOTAL, [6, 7, 0, 1, 2])
    mix_q = _distribute(MIXED_TOTAL, [3, 4, 5, 6, 7])
    corpus = []
    uid = 0
    for t, topic in enumerate(AURC8_TOPICS):
        slug = topic.replace(" ", "-")
        position = 0

        def add(tokens, labels):
            nonlocal position, uid
            corpus.append(sent(f"{slug}-{position:04d}", topic, position, tokens, labels))
            position += 1
            uid += 1

        for _ in range(non_q[t]):
            add(["the", "report", f"n{uid}", "."], [NON, NON, NON, NON])
        for _ in range(pro_q[t]):
            add(["support", f"p{uid}", "strongly", "."], [PRO, PRO, PRO, NON])
        for _ in range(con_q[t]):
            add(["oppose", f"c{uid}", "firmly", "."], [CON, CON, CON, NON])
        for k in range(mix_q[t]):
            if k % 2 == 0:
                add(["he", "thinks", "that", f"m{uid}", "matters"],
                    [NON, NON, NON, PRO, PRO])
            else:
                add([f"m{uid}", "is", "harmful", "to", "everyone"],
                    [CON, CON, CON, NON, NON])
        assert position == 1000, (topic, position)
    return corpus


def write_corpus_file(corpus, path) -> None:
    from argrobust.corpus import write_corpus

    with open(path, "w", encoding="utf-8") as fh:
        write_corpus(corpus, fh)


# ---------------------------------------------------------------------------
# Independent oracles (kept free of the library's scoring code paths).


def oracle_sentence_segment_f1(gold_labels, pred_labels) -> float:
    """Brute-force reimplementation of the per-sentence segment score."""
    runs = []
    i = 0
    while i < len(gold_labels):
        j = i
        while j < len(gold_labels) and gold_labels[j] == gold_labels[i]:
            j += 1
        runs.append((i, j, gold_labels[i]))
        i = j
    stance = [(s, e, l) for s, e, l in runs if l in (PRO, CON)]
    if not stance:
        if any(p in (PRO, CON) for p in pred_labels):
            return 0.0
        return 1.0
    true = 0
    for s, e, l in stance:
        overlap = sum(1 for k in range(s, e) if pred_labels[k] == l)
        if overlap / (e - s) > 0.5:
            true += 1
    return true / len(stance)


def oracle_sentence_label_table(labels, tie_value):
    """Direct transcription of the token-to-sentence aggregation table."""
    kinds = set(labels)
    f_pro = sum(1 for l in labels if l == PRO)
    f_con = sum(1 for l in labels if l == CON)
    if kinds == {NON}:
        return NON
    if kinds <= {NON, PRO}:
        return PRO
    if kinds <= {NON, CON}:
        return CON
    if f_pro > f_con:
        return PRO
    if f_con > f_pro:
        return CON
    return tie_value


def oracle_macro_f1(gold, pred, classes):
    """Macro F1 via sklearn, over the classes present in gold or prediction."""
    from sklearn.metrics import f1_score

    present = [c for c in classes if c in gold or c in pred]
    return f1_score(
        [str(g) for g in gold],
        [str(p) for p in pred],
        labels=[str(c) for c in present],
        average="macro",
        zero_division=0,
    )
