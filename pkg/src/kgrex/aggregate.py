"""Annotation aggregation and judge-vs-annotator agreement statistics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .rules import RuleCategory

log = logging.getLogger(__name__)


class AggregationError(ValueError):
    pass


@dataclass(frozen=True)
class HumanAnnotation:
    """One annotator's ratings for one explanation of one rule.

    Scales: correctness and clarity run 1 (worst) to 5 (best);
    logicalness judges the rule itself from 1 to 3; the four mention
    counters are non-negative integers. ``preferred`` carries the
    pairwise choice in phase-1 style annotation rounds.
    """

    annotator_id: str
    rule_id: str
    target: str
    correctness: int
    clarity: int
    missed_entities: int
    missed_relations: int
    hallucinated_entities: int
    hallucinated_relations: int
    logicalness: int
    preferred: str | None = None

    def __post_init__(self):
        if not 1 <= self.correctness <= 5:
            raise AggregationError("correctness must be in [1, 5]")
        if not 1 <= self.clarity <= 5:
            raise AggregationError("clarity must be in [1, 5]")
        if not 1 <= self.logicalness <= 3:
            raise AggregationError("logicalness must be in [1, 3]")
        for name in (
            "missed_entities",
            "missed_relations",
            "hallucinated_entities",
            "hallucinated_relations",
        ):
            if getattr(self, name) < 0:
                raise AggregationError(f"{name} must be non-negative")


METRIC_FIELDS = (
    "missed_entities",
    "missed_relations",
    "hallucinated_entities",
    "hallucinated_relations",
    "correctness",
    "clarity",
    "logicalness",
)


@dataclass(frozen=True)
class AggregateRow:
    slice_label: str
    n: int
    means: dict[str, float] = field(hash=False)

    def __post_init__(self):
        if self.n <= 0:
            raise AggregationError("aggregate row needs n > 0")


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _row(label: str, per_rule_means: list[dict[str, float]]) -> AggregateRow:
    keys = per_rule_means[0].keys()
    means = {k: _mean([m[k] for m in per_rule_means if k in m]) for k in keys}
    return AggregateRow(slice_label=label, n=len(per_rule_means), means=means)


def aggregate_phase1(
    annotations: Iterable[HumanAnnotation],
    perplexity_by_target: Mapping[tuple[str, str], float] | None = None,
) -> list[AggregateRow]:
    """Majority-vote aggregation for pairwise-preference rounds.

    Every rule must carry exactly three annotations, each with a
    ``preferred`` tag; per rule, only the annotators who chose the
    majority explanation contribute to the metric means. Rows cover the
    whole set, each preferred target, the unanimous subset, and the
    2-to-1 majority subset.
    """
    by_rule: dict[str, list[HumanAnnotation]] = {}
    for ann in annotations:
        by_rule.setdefault(ann.rule_id, []).append(ann)
    if not by_rule:
        raise AggregationError("no annotations to aggregate")

    per_rule: list[tuple[str, str, bool, dict[str, float]]] = []
    for rule_id in sorted(by_rule):
        group = by_rule[rule_id]
        if len(group) != 3:
            raise AggregationError(
                f"rule {rule_id} has {len(group)} annotations; phase-1 needs exactly 3"
            )
        if any(a.preferred is None for a in group):
            raise AggregationError(f"rule {rule_id} has annotations without a preference")
        votes: dict[str, int] = {}
        for a in group:
            votes[a.preferred] = votes.get(a.preferred, 0) + 1
        winner, count = max(votes.items(), key=lambda kv: kv[1])
        choosers = [a for a in group if a.preferred == winner]
        means = {f: _mean([getattr(a, f) for a in choosers]) for f in METRIC_FIELDS}
        if perplexity_by_target is not None:
            key = (rule_id, winner)
            if key in perplexity_by_target:
                means["perplexity"] = perplexity_by_target[key]
        per_rule.append((rule_id, winner, count == 3, means))

    rows = [_row("all", [m for *_, m in per_rule])]
    for target in sorted({winner for _, winner, _, _ in per_rule}):
        rows.append(_row(target, [m for _, w, _, m in per_rule if w == target]))
    unanimous = [m for _, _, u, m in per_rule if u]
    majority = [m for _, _, u, m in per_rule if not u]
    if unanimous:
        rows.append(_row("unanimous", unanimous))
    if majority:
        rows.append(_row("majority", majority))
    return rows


CATEGORY_SLICES = ("all", "2 atoms", "3 atoms", "binary", "mediator", "concatenated")


def _category_labels(category: RuleCategory) -> tuple[str, str]:
    return (f"{category.atom_count} atoms", category.relation_kind)


def aggregate_by_category(
    annotations: Iterable[HumanAnnotation],
    categories: Mapping[str, RuleCategory],
    perplexity_by_target: Mapping[tuple[str, str], float] | None = None,
) -> list[AggregateRow]:
    """Slice means over all annotators for category-structured rounds.

    Slices follow the report layout: all rules, atom-count buckets, and
    relation-kind buckets. Empty slices are omitted with a warning.
    """
    anns = list(annotations)
    if not anns:
        raise AggregationError("no annotations to aggregate")
    for ann in anns:
        if ann.rule_id not in categories:
            raise AggregationError(f"rule {ann.rule_id} has no category")

    def metric_values(ann: HumanAnnotation) -> dict[str, float]:
        values = {f: float(getattr(ann, f)) for f in METRIC_FIELDS}
        if perplexity_by_target is not None:
            key = (ann.rule_id, ann.target)
            if key in perplexity_by_target:
                values["perplexity"] = perplexity_by_target[key]
        return values

    rows: list[AggregateRow] = []
    for slice_label in CATEGORY_SLICES:
        if slice_label == "all":
            selected = anns
        else:
            selected = [
                a for a in anns if slice_label in _category_labels(categories[a.rule_id])
            ]
        if not selected:
            log.warning("category slice %r has no annotations; omitted", slice_label)
            continue
        values = [metric_values(a) for a in selected]
        keys: list[str] = list(values[0].keys())
        means = {
            k: _mean([v[k] for v in values if k in v])
            for k in keys
            if any(k in v for v in values)
        }
        rows.append(AggregateRow(slice_label=slice_label, n=len(selected), means=means))
    return rows


# -- correlations -------------------------------------------------------------

def _ranks(values: Sequence[float]) -> list[float]:
    """Average ranks (1-based); ties share the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson product-moment correlation."""
    if len(xs) != len(ys):
        raise AggregationError("length mismatch")
    n = len(xs)
    if n < 2:
        raise AggregationError("need at least 2 points")
    mx, my = _mean(xs), _mean(ys)
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    denom = math.sqrt(sum(d * d for d in dx)) * math.sqrt(sum(d * d for d in dy))
    if denom == 0:
        raise AggregationError("constant input has undefined correlation")
    return sum(a * b for a, b in zip(dx, dy)) / denom


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    if len(xs) != len(ys):
        raise AggregationError("length mismatch")
    if len(xs) < 2:
        raise AggregationError("need at least 2 points")
    return pearson(_ranks(xs), _ranks(ys))


def round_half_up(value: float) -> int:
    """Round to the nearest integer with .5 going up."""
    return math.floor(value + 0.5)


def round_annotator_means(values: Sequence[float]) -> list[int]:
    """Half-up rounding of mean scores onto the integer judge scale."""
    out = []
    for v in values:
        if not 1 <= v <= 5:
            raise AggregationError(f"mean score out of range: {v}")
        out.append(round_half_up(v))
    return out


@dataclass(frozen=True)
class CorrelationResult:
    judge_model: str
    generator_model: str
    spearman: float
    pearson: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise AggregationError("correlation needs n >= 2")
        for coeff in (self.spearman, self.pearson):
            if not -1.0 - 1e-12 <= coeff <= 1.0 + 1e-12:
                raise AggregationError("correlation coefficient out of range")


def judge_correlation(
    judge_model: str,
    generator_model: str,
    judge_scores: Mapping[str, int],
    annotator_means: Mapping[str, float],
) -> CorrelationResult:
    """Correlate judge scores with rounded annotator means over shared rules."""
    rule_ids = sorted(set(judge_scores) & set(annotator_means))
    if len(rule_ids) < 2:
        raise AggregationError("need at least 2 jointly scored rules")
    xs = [float(judge_scores[r]) for r in rule_ids]
    ys = [float(v) for v in round_annotator_means([annotator_means[r] for r in rule_ids])]
    return CorrelationResult(
        judge_model=judge_model,
        generator_model=generator_model,
        spearman=spearman(xs, ys),
        pearson=pearson(xs, ys),
        n=len(rule_ids),
    )
