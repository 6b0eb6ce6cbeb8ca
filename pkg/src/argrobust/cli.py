"""Command-line surface tying the toolkit into reproducible pipelines.

All data goes to files or stdout; diagnostics go to stderr.  Every command
is deterministic given its inputs, flags and seed.
"""

from __future__ import annotations

import json
import sys
from collections import Counter
from pathlib import Path

import click

from . import corpus as corpus_mod
from . import metrics as metrics_mod
from . import perturb as perturb_mod
from . import reprogate as repro_mod
from . import subpop as subpop_mod
from .corpus import Scheme, Split
from .labels import binarize, derive_sentence_label
from .report import dump_json, render_table

SCHEMES = {s.value: s for s in Scheme}
SPLITS = {s.value: s for s in Split}


def _load_config(path):
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _cfg(value, config, key, default):
    """Flag wins over config file wins over default."""
    if value is not None:
        return value
    return config.get(key, default)


def _read_corpus(path, topics=None):
    kwargs = {"topics": tuple(topics)} if topics else {}
    try:
        with open(path, encoding="utf-8") as fh:
            return corpus_mod.parse_corpus(fh, **kwargs)
    except corpus_mod.CorpusFormatError as exc:
        raise click.ClickException(f"{path}: {exc}")


def _read_predictions_by_run(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return metrics_mod.group_by_run(metrics_mod.read_predictions(fh))
    except metrics_mod.PredictionError as exc:
        raise click.ClickException(f"{path}: {exc}")


def _select_split(corpus, scheme, split, dedup, topics=None):
    kwargs = {"topics": tuple(topics)} if topics else {}
    assignment = corpus_mod.assign_splits(corpus, scheme, **kwargs)
    if dedup:
        corpus, assignment, _ = corpus_mod.deduplicate(corpus, assignment, **kwargs)
    if split is None:
        return corpus, assignment
    return corpus_mod.split_sentences(corpus, assignment, split), assignment


def _write_output(payload, output):
    if output == "-":
        dump_json(payload, sys.stdout)
    else:
        with open(output, "w", encoding="utf-8") as fh:
            dump_json(payload, fh)


seed_option = click.option("--seed", type=int, default=None, help="Master seed.")
config_option = click.option(
    "--config", "config_path", type=click.Path(exists=True), default=None,
    help="JSON config file supplying flag defaults.",
)
threads_option = click.option(
    "--threads", type=int, default=1, help="Worker cap (results are identical).",
)
topics_option = click.option(
    "--topic-registry", "topics", multiple=True,
    help="Override the topic registry (ordered; repeat per topic).",
)


@click.group()
def main():
    """Evaluation and robustness-testing toolkit for argument unit recognition."""


@main.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, help="Canonical JSONL output path.")
@click.option("--format", "input_format", type=click.Choice(["jsonl", "tsv"]),
              default="jsonl")
@click.option("--strict/--no-strict", default=False,
              help="Fail on the first schema error instead of skipping lines.")
@config_option
@topics_option
def ingest(input_path, output, input_format, strict, config_path, topics):
    """Validate an input corpus and write it in canonical JSONL."""
    config = _load_config(config_path)
    registry = tuple(topics) if topics else tuple(
        config.get("topics", corpus_mod.AURC8_TOPICS)
    )
    with open(input_path, encoding="utf-8") as fh:
        if input_format == "tsv":
            lines = _tsv_to_jsonl_lines(fh, config.get("tsv", {}))
        else:
            lines = fh.readlines()
    parsed, errors = corpus_mod.parse_corpus_lenient(lines, topics=registry)
    for err in errors:
        click.echo(f"error: {err}", err=True)
    click.echo(f"parsed {len(parsed)} sentences, {len(errors)} bad lines", err=True)
    if errors and strict:
        raise click.ClickException("schema errors in strict mode")
    with open(output, "w", encoding="utf-8") as fh:
        corpus_mod.write_corpus(parsed, fh)


def _tsv_to_jsonl_lines(stream, tsv_config):
    """Convert column-mapped TSV to canonical JSONL lines.

    The mapping lives in the config file, e.g.
    {"tsv": {"columns": {"id": 0, "topic": 1, "tokens": 2, "labels": 3},
             "delimiter": "\\t", "token_separator": " "}}
    """
    columns = tsv_config.get(
        "columns", {"id": 0, "topic": 1, "tokens": 2, "labels": 3}
    )
    delimiter = tsv_config.get("delimiter", "\t")
    token_sep = tsv_config.get("token_separator", " ")
    lines = []
    for raw in stream:
        raw = raw.rstrip("\n")
        if not raw:
            continue
        fields = raw.split(delimiter)
        try:
            obj = {
                "id": fields[columns["id"]],
                "topic": fields[columns["topic"]],
                "tokens": fields[columns["tokens"]].split(token_sep),
                "labels": fields[columns["labels"]].split(token_sep),
            }
        except IndexError:
            obj = {"id": "", "topic": "", "tokens": [], "labels": ["?"]}
        lines.append(json.dumps(obj, ensure_ascii=False))
    return lines


@main.command()
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--scheme", type=click.Choice(sorted(SCHEMES)), default=None,
              help="Also report per-split counts under this scheme, after dedup.")
@click.option("-o", "--output", default="-")
@topics_option
def stats(corpus_path, scheme, output, topics):
    """Corpus composition statistics (ARG share, stance mix)."""
    corpus = _read_corpus(corpus_path, topics)
    payload = {"stats": corpus_mod.corpus_stats(corpus).as_dict()}
    if scheme:
        assignment = corpus_mod.assign_splits(
            corpus, SCHEMES[scheme], **({"topics": tuple(topics)} if topics else {})
        )
        deduped, assignment, removals = corpus_mod.deduplicate(
            corpus, assignment, **({"topics": tuple(topics)} if topics else {})
        )
        per_split = Counter()
        for s in deduped:
            split = assignment.map.get(s.id)
            if split:
                per_split[(s.topic, split.value)] += 1
        payload["splits"] = {
            "scheme": scheme,
            "removed_duplicates": len(removals),
            "counts": {
                f"{topic}/{split}": n
                for (topic, split), n in sorted(per_split.items())
            },
        }
    _write_output(payload, output)


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--predictions", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "label_space", type=click.Choice(["3class", "binary"]),
              default=None)
@click.option("--metrics", "which", default="token,sentence,segment",
              help="Comma-separated subset of token,sentence,segment.")
@click.option("--scheme", type=click.Choice(sorted(SCHEMES)), default=None)
@click.option("--split", type=click.Choice(sorted(SPLITS)), default=None)
@click.option("--dedup/--no-dedup", default=False)
@click.option("--table", "show_table", is_flag=True, help="Print a text table too.")
@click.option("-o", "--output", default="-")
@seed_option
@config_option
@threads_option
@topics_option
def evaluate(corpus_path, pred_path, label_space, which, scheme, split, dedup,
             show_table, output, seed, config_path, threads, topics):
    """Score predictions: token-F1, sentence-F1, segment-F1 per run."""
    config = _load_config(config_path)
    seed = _cfg(seed, config, "seed", 0)
    label_space = _cfg(label_space, config, "labels", "3class")
    corpus = _read_corpus(corpus_path, topics)
    if scheme:
        corpus, _ = _select_split(
            corpus, SCHEMES[scheme], SPLITS[split] if split else None, dedup, topics
        )
    runs = _read_predictions_by_run(pred_path)
    if not runs:
        raise click.ClickException("no prediction records")
    wanted = [w.strip() for w in which.split(",") if w.strip()]
    scorers = {
        "token": lambda c, p: metrics_mod.token_f1(c, p, label_space, seed=seed),
        "sentence": lambda c, p: metrics_mod.sentence_f1(c, p, label_space, seed=seed),
        "segment": lambda c, p: metrics_mod.segment_f1(c, p, seed=seed),
    }
    unknown = [w for w in wanted if w not in scorers]
    if unknown:
        raise click.ClickException(f"unknown metrics {unknown}")
    per_run = {}
    try:
        for run in sorted(runs):
            per_run[run] = {
                f"{name}_f1": scorers[name](corpus, runs[run]) for name in wanted
            }
    except (metrics_mod.PredictionError, ValueError) as exc:
        raise click.ClickException(str(exc))
    payload = {
        "label_space": label_space,
        "n_sentences": len(corpus),
        "per_run": {str(r): v for r, v in per_run.items()},
        "aggregate": {
            f"{name}_f1": metrics_mod.aggregate_runs(
                f"{name}_f1", [per_run[r][f"{name}_f1"] for r in sorted(per_run)]
            ).as_dict()
            for name in wanted
        },
    }
    _write_output(payload, output)
    if show_table:
        rows = [
            [name, payload["aggregate"][f"{name}_f1"]["mean"],
             payload["aggregate"][f"{name}_f1"]["std"]]
            for name in wanted
        ]
        click.echo(render_table(["metric", "mean", "std"], rows))


@main.group()
def perturb():
    """Build and score the before/after perturbation sets."""


@perturb.command("t1-candidates")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("-o", "--output", required=True)
@topics_option
def perturb_t1_candidates(corpus_path, output, topics):
    """Emit announcing-segment candidates for manual annotation."""
    corpus = _read_corpus(corpus_path, topics)
    pairs = perturb_mod.extract_adjacent_pairs(
        corpus, perturb_mod.PairOrder.NONARG_FIRST
    )
    candidates = perturb_mod.gen_t1_candidates(pairs)
    with open(output, "w", encoding="utf-8") as fh:
        perturb_mod.write_pairs(candidates, fh)
    click.echo(f"wrote {len(candidates)} candidates", err=True)


@perturb.command("t1-assemble")
@click.option("--candidates", "cand_path", required=True, type=click.Path(exists=True))
@click.option("-o", "--output", required=True)
def perturb_t1_assemble(cand_path, output):
    """Assemble annotated candidates into final before/after pairs."""
    with open(cand_path, encoding="utf-8") as fh:
        rows = perturb_mod.read_pairs(fh)
    try:
        assembled = perturb_mod.assemble_t1(rows)
    except perturb_mod.PerturbationSchemaError as exc:
        raise click.ClickException(str(exc))
    with open(output, "w", encoding="utf-8") as fh:
        perturb_mod.write_pairs(assembled, fh)
    per_topic = Counter(p.topic for p in assembled)
    click.echo(
        f"assembled {len(assembled)} pairs "
        f"(per topic, target 100 each: {dict(sorted(per_topic.items()))})",
        err=True,
    )


@perturb.command("t2")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--count-per-topic", type=int, default=50, show_default=True)
@click.option("-o", "--output", required=True)
@seed_option
@config_option
@topics_option
def perturb_t2(corpus_path, count_per_topic, output, seed, config_path, topics):
    """Candidates concatenating ARG units with non-ARG sentences."""
    config = _load_config(config_path)
    seed = _cfg(seed, config, "seed", 0)
    corpus = _read_corpus(corpus_path, topics)
    try:
        pairs = perturb_mod.gen_t2(corpus, count_per_topic, seed=seed)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    with open(output, "w", encoding="utf-8") as fh:
        perturb_mod.write_pairs(pairs, fh)
    click.echo(f"wrote {len(pairs)} candidates", err=True)


@perturb.command("t3")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--count", type=int, default=200, show_default=True)
@click.option("--topics", "balance_topics", multiple=True,
              help="Topics to balance over (default: all topics with pairs).")
@click.option("-o", "--output", required=True)
@seed_option
@config_option
@topics_option
def perturb_t3(corpus_path, count, balance_topics, output, seed, config_path, topics):
    """Candidates removing the non-ARG context around ARG segments."""
    config = _load_config(config_path)
    seed = _cfg(seed, config, "seed", 0)
    corpus = _read_corpus(corpus_path, topics)
    try:
        pairs = perturb_mod.gen_t3(
            corpus, count, seed=seed,
            topics=list(balance_topics) if balance_topics else None,
        )
    except ValueError as exc:
        raise click.ClickException(str(exc))
    with open(output, "w", encoding="utf-8") as fh:
        perturb_mod.write_pairs(pairs, fh)
    click.echo(f"wrote {len(pairs)} candidates", err=True)


@perturb.command("eval")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.option("--pred-before", required=True, type=click.Path(exists=True))
@click.option("--pred-after", required=True, type=click.Path(exists=True))
@click.option("--approved-only/--all-pairs", default=False)
@click.option("--table", "show_table", is_flag=True)
@click.option("-o", "--output", default="-")
@seed_option
@config_option
@threads_option
def perturb_eval(pairs_path, pred_before, pred_after, approved_only, show_table,
                 output, seed, config_path, threads):
    """Accuracy before/after the perturbation plus the deltas."""
    config = _load_config(config_path)
    seed = _cfg(seed, config, "seed", 0)
    with open(pairs_path, encoding="utf-8") as fh:
        pairs = perturb_mod.read_pairs(fh)
    if approved_only:
        pairs = [p for p in pairs if p.approved]
    before = _read_predictions_by_run(pred_before)
    after = _read_predictions_by_run(pred_after)
    try:
        result = perturb_mod.eval_perturbation(pairs, before, after, seed=seed)
    except (metrics_mod.PredictionError, ValueError) as exc:
        raise click.ClickException(str(exc))
    _write_output(result.as_dict(), output)
    if show_table:
        d = result.as_dict()["mean_delta"]
        rows = [[
            result.before.mean, result.before.std,
            result.after.mean, result.after.std,
            d["delta_abs"], d["delta_rel_pct"],
        ]]
        click.echo(render_table(
            ["before", "(std)", "after", "(std)", "delta_abs", "delta_rel_%"], rows
        ))


@main.group()
def subpop():
    """Subpopulation correlation analyses."""


def _subpop_command(test_id):
    @click.option("--test-corpus", "test_path", required=True,
                  type=click.Path(exists=True))
    @click.option("--train-corpus", "train_path",
                  required=test_id in ("T4", "T5"), type=click.Path(exists=True))
    @click.option("--embeddings", "emb_path",
                  required=test_id in ("T4", "T5"), type=click.Path(exists=True))
    @click.option("--predictions", "pred_path", required=True,
                  type=click.Path(exists=True))
    @click.option("--oov", type=click.Choice(["skip", "zero"]), default=None)
    @click.option("-o", "--output", default="-")
    @seed_option
    @config_option
    @threads_option
    @topics_option
    def command(test_path, train_path, emb_path, pred_path, oov, output, seed,
                config_path, threads, topics):
        config = _load_config(config_path)
        seed = _cfg(seed, config, "seed", 0)
        oov = _cfg(oov, config, "oov", "skip")
        test_corpus = _read_corpus(test_path, topics)
        train_corpus = _read_corpus(train_path, topics) if train_path else None
        table = None
        if emb_path:
            with open(emb_path, encoding="utf-8") as fh:
                table = subpop_mod.load_embeddings(fh)
        runs = _read_predictions_by_run(pred_path)
        try:
            report = subpop_mod.run_subpop(
                test_id, test_corpus, train_corpus, runs,
                table=table, seed=seed, oov=oov,
            )
        except (metrics_mod.PredictionError, ValueError) as exc:
            raise click.ClickException(str(exc))
        _write_output(report.as_dict(), output)

    command.__doc__ = f"Point-biserial report for subpopulation test {test_id}."
    return command


subpop.command("t4")(_subpop_command("T4"))
subpop.command("t5")(_subpop_command("T5"))
subpop.command("t6")(_subpop_command("T6"))


@main.command()
@click.option("--entries", "entries_path", required=True, type=click.Path(exists=True))
@click.option("--table", "show_table", is_flag=True)
@click.option("-o", "--output", default="-")
def repro(entries_path, show_table, output):
    """Apply the two-standard-deviation reproduction gate to a score grid."""
    with open(entries_path, encoding="utf-8") as fh:
        entries = repro_mod.read_entries(fh)
    result = repro_mod.compare_table(entries)
    _write_output(result.as_dict(), output)
    if show_table:
        rows = [
            [v.entry.setting, v.entry.model, v.entry.setup, v.entry.metric,
             v.entry.original_mean, v.entry.repro.mean, v.entry.repro.std,
             "yes" if v.reproduced else "no"]
            for v in result.verdicts
        ]
        click.echo(render_table(
            ["setting", "model", "setup", "metric", "original", "mean", "std",
             "reproduced"],
            rows,
        ))


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--scheme", type=click.Choice(sorted(SCHEMES)), required=True)
@click.option("--predict-split", type=click.Choice(sorted(SPLITS)), default="test",
              show_default=True)
@click.option("--dedup/--no-dedup", default=False)
@click.option("-o", "--output", required=True)
@seed_option
@config_option
@topics_option
def baseline(corpus_path, scheme, predict_split, dedup, output, seed, config_path,
             topics):
    """Majority-class predictor: label every sentence with the training
    split's majority sentence label (sentence granularity, run 0)."""
    config = _load_config(config_path)
    seed = _cfg(seed, config, "seed", 0)
    corpus = _read_corpus(corpus_path, topics)
    kwargs = {"topics": tuple(topics)} if topics else {}
    assignment = corpus_mod.assign_splits(corpus, SCHEMES[scheme], **kwargs)
    if dedup:
        corpus, assignment, _ = corpus_mod.deduplicate(corpus, assignment, **kwargs)
    train = corpus_mod.split_sentences(corpus, assignment, Split.TRAIN)
    if not train:
        raise click.ClickException("no training split to take the majority from")
    counts = Counter(
        derive_sentence_label(s.labels, seed=seed, key=s.id).value for s in train
    )
    majority = max(sorted(counts), key=counts.__getitem__)
    targets = corpus_mod.split_sentences(corpus, assignment, SPLITS[predict_split])
    with open(output, "w", encoding="utf-8") as fh:
        for s in targets:
            fh.write(json.dumps({
                "sentence_id": s.id,
                "run": 0,
                "granularity": "sentence",
                "label": majority,
            }, sort_keys=True) + "\n")
    click.echo(
        f"majority label {majority}; wrote {len(targets)} predictions", err=True
    )


if __name__ == "__main__":
    main()
