"""Two-standard-deviation reproduction gate and comparison tables."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable

from .metrics import ScoreDistribution, aggregate_runs


@dataclass(frozen=True)
class ReproEntry:
    """One cell of an original-vs-reproduced score comparison."""

    setting: str  # e.g. "in-domain"
    model: str
    metric: str  # e.g. "token-F1"
    setup: str  # "token-based" / "sentence-based"
    original_mean: float
    repro: ScoreDistribution


def gate(entry: ReproEntry) -> bool:
    """True iff the original mean lies within two std of the reproduced mean.

    The boundary counts as reproduced; with zero std only exact equality
    passes.
    """
    gap = abs(entry.original_mean - entry.repro.mean)
    if entry.repro.std == 0:
        return gap == 0
    return gap <= 2 * entry.repro.std


@dataclass(frozen=True)
class ReproVerdict:
    entry: ReproEntry
    reproduced: bool


@dataclass(frozen=True)
class ReproReport:
    verdicts: tuple[ReproVerdict, ...]
    per_setting: dict[str, tuple[int, int]]  # setting -> (reproduced, total)

    def as_dict(self) -> dict:
        return {
            "entries": [
                {
                    "setting": v.entry.setting,
                    "model": v.entry.model,
                    "metric": v.entry.metric,
                    "setup": v.entry.setup,
                    "original_mean": v.entry.original_mean,
                    "repro_mean": v.entry.repro.mean,
                    "repro_std": v.entry.repro.std,
                    "reproduced": v.reproduced,
                }
                for v in self.verdicts
            ],
            "per_setting": {
                k: {"reproduced": r, "total": t}
                for k, (r, t) in sorted(self.per_setting.items())
            },
        }


def compare_table(entries: Iterable[ReproEntry]) -> ReproReport:
    """Apply the gate to every entry and count successes per setting."""
    verdicts = tuple(ReproVerdict(entry=e, reproduced=gate(e)) for e in entries)
    per_setting: dict[str, list[int]] = {}
    for v in verdicts:
        counts = per_setting.setdefault(v.entry.setting, [0, 0])
        counts[0] += int(v.reproduced)
        counts[1] += 1
    return ReproReport(
        verdicts=verdicts,
        per_setting={k: (r, t) for k, (r, t) in per_setting.items()},
    )


def read_entries(stream: IO) -> list[ReproEntry]:
    """Load comparison entries from a JSON file.

    Expected shape: a list of objects with setting, model, metric, setup,
    original_mean, and either repro_mean + repro_std or repro_values.
    """
    data = json.load(stream)
    entries = []
    for obj in data:
        if "repro_values" in obj:
            dist = aggregate_runs(obj["metric"], obj["repro_values"])
        else:
            dist = ScoreDistribution(
                metric_name=obj["metric"],
                values=(),
                mean=float(obj["repro_mean"]),
                std=float(obj["repro_std"]),
            )
        entries.append(
            ReproEntry(
                setting=obj["setting"],
                model=obj["model"],
                metric=obj["metric"],
                setup=obj["setup"],
                original_mean=float(obj["original_mean"]),
                repro=dist,
            )
        )
    return entries
