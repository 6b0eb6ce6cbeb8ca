"""JSON-first report emission with an aligned-column text renderer."""

from __future__ import annotations

import json
from typing import IO, Sequence


def dump_json(obj, stream: IO) -> None:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    stream.write(json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False))
    stream.write("\n")


def render_table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Plain aligned-column table; numbers are right-aligned."""
    cells = [[_fmt(v) for v in row] for row in rows]
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in cells)) if cells else len(headers[i])
        for i in range(len(headers))
    ]
    numeric = [
        bool(cells) and all(_is_number(row[i]) for row in rows) for i in range(len(headers))
    ]

    def line(values, is_header=False):
        parts = []
        for i, v in enumerate(values):
            if numeric[i] and not is_header:
                parts.append(v.rjust(widths[i]))
            else:
                parts.append(v.ljust(widths[i]))
        return "  ".join(parts).rstrip()

    out = [line(list(headers), is_header=True)]
    out.append("  ".join("-" * w for w in widths))
    out.extend(line(row) for row in cells)
    return "\n".join(out)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    if value is None:
        return "-"
    return str(value)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)
