"""CSV and Markdown report tables for aggregated results and correlations.

Column layout mirrors the annotation metrics: the four mention counters,
correctness, clarity, logicalness, and perplexity where available. All
numbers are fixed-format so repeated runs produce identical bytes.
"""

from __future__ import annotations

import csv
import io
from typing import Iterable, Mapping, Sequence

from .aggregate import AggregateRow, CorrelationResult

COLUMNS = (
    ("missed_entities", "m_ent"),
    ("missed_relations", "m_rel"),
    ("hallucinated_entities", "h_ent"),
    ("hallucinated_relations", "h_rel"),
    ("correctness", "correctness"),
    ("clarity", "clarity"),
    ("logicalness", "logical"),
    ("perplexity", "perplexity"),
)


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}"


def _present_columns(rows: Sequence[AggregateRow]) -> list[tuple[str, str]]:
    return [(key, label) for key, label in COLUMNS if any(key in r.means for r in rows)]


def aggregate_rows_csv(rows: Sequence[AggregateRow]) -> str:
    columns = _present_columns(rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["slice", "n"] + [label for _, label in columns])
    for row in rows:
        writer.writerow(
            [row.slice_label, row.n] + [_fmt(row.means.get(key)) for key, _ in columns]
        )
    return buf.getvalue()


def aggregate_rows_markdown(rows: Sequence[AggregateRow], title: str,
                            note: str | None = None) -> str:
    columns = _present_columns(rows)
    lines = [f"## {title}", ""]
    header = ["slice", "n"] + [label for _, label in columns]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "|".join(["---"] * len(header)) + "|")
    for row in rows:
        cells = [row.slice_label, str(row.n)] + [
            _fmt(row.means.get(key)) for key, _ in columns
        ]
        lines.append("| " + " | ".join(cells) + " |")
    if note:
        lines += ["", f"_{note}_"]
    lines.append("")
    return "\n".join(lines)


MENTION_NOTE = (
    "Mention counters (m/h ent/rel) in automatic runs come from surface matching, "
    "not human counting; means use half-up rounding nowhere, only display rounding."
)


def correlations_csv(results: Sequence[CorrelationResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["judge", "explanation_generated_by", "spearman", "pearson", "n"])
    for r in sorted(results, key=lambda r: (r.judge_model, r.generator_model)):
        writer.writerow(
            [r.judge_model, r.generator_model, f"{r.spearman:.3f}", f"{r.pearson:.3f}", r.n]
        )
    return buf.getvalue()


def correlations_markdown(results: Sequence[CorrelationResult]) -> str:
    lines = [
        "## Correlation between judge models and annotators (correctness)",
        "",
        "| judge | explanation generated by | spearman | pearson | n |",
        "|---|---|---|---|---|",
    ]
    for r in sorted(results, key=lambda r: (r.judge_model, r.generator_model)):
        lines.append(
            f"| {r.judge_model} | {r.generator_model} | {r.spearman:.3f} | {r.pearson:.3f} | {r.n} |"
        )
    lines.append("")
    return "\n".join(lines)


def rules_summary_markdown(per_relation: Mapping[str, int], total: int) -> str:
    lines = [
        "## Mined rules",
        "",
        f"Total rules: {total}",
        "",
        "| head relation | rules |",
        "|---|---|",
    ]
    for name in sorted(per_relation):
        lines.append(f"| {name} | {per_relation[name]} |")
    lines.append("")
    return "\n".join(lines)
