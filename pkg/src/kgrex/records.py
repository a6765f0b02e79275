"""JSONL record schemas shared by the pipeline commands and the API."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .aggregate import HumanAnnotation
from .metrics import AutoMetrics


class RecordError(ValueError):
    pass


@dataclass(frozen=True)
class ExplanationRecord:
    """One generated explanation for one rule under one strategy and model."""

    rule_id: str
    strategy: str
    model: str
    text: str
    auto_metrics: AutoMetrics | None = None

    def key(self) -> tuple[str, str, str]:
        return (self.rule_id, self.strategy, self.model)

    def to_json(self) -> dict:
        record = {
            "rule_id": self.rule_id,
            "strategy": self.strategy,
            "model": self.model,
            "text": self.text,
        }
        if self.auto_metrics is not None:
            m = self.auto_metrics
            record["auto_metrics"] = {
                "m_ent": m.missed_entities,
                "m_rel": m.missed_relations,
                "h_ent": m.hallucinated_entities,
                "h_rel": m.hallucinated_relations,
            }
            if m.perplexity is not None:
                record["auto_metrics"]["perplexity"] = m.perplexity
        return record

    @classmethod
    def from_json(cls, record: dict) -> "ExplanationRecord":
        metrics = None
        if "auto_metrics" in record and record["auto_metrics"] is not None:
            m = record["auto_metrics"]
            metrics = AutoMetrics(
                missed_entities=m["m_ent"],
                missed_relations=m["m_rel"],
                hallucinated_entities=m["h_ent"],
                hallucinated_relations=m["h_rel"],
                perplexity=m.get("perplexity"),
            )
        try:
            return cls(
                rule_id=record["rule_id"],
                strategy=record["strategy"],
                model=record["model"],
                text=record["text"],
                auto_metrics=metrics,
            )
        except KeyError as exc:
            raise RecordError(f"explanation record missing field {exc}") from exc


def write_explanations(path, records: Iterable[ExplanationRecord]) -> int:
    records = sorted(records, key=lambda r: r.key())
    seen = set()
    for r in records:
        if r.key() in seen:
            raise RecordError(f"duplicate explanation record {r.key()}")
        seen.add(r.key())
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
    return len(records)


def read_explanations(path) -> list[ExplanationRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(ExplanationRecord.from_json(json.loads(line)))
            except (json.JSONDecodeError, RecordError) as exc:
                raise RecordError(f"{path}:{lineno}: {exc}") from exc
    return out


# annotation JSONL uses the short column names of the report tables
_ANN_FIELDS = {
    "m_ent": "missed_entities",
    "m_rel": "missed_relations",
    "h_ent": "hallucinated_entities",
    "h_rel": "hallucinated_relations",
}


def annotation_to_json(ann: HumanAnnotation) -> dict:
    record = {
        "annotator_id": ann.annotator_id,
        "rule_id": ann.rule_id,
        "target": ann.target,
        "correctness": ann.correctness,
        "clarity": ann.clarity,
        "logicalness": ann.logicalness,
    }
    for short, long in _ANN_FIELDS.items():
        record[short] = getattr(ann, long)
    if ann.preferred is not None:
        record["preferred"] = ann.preferred
    return record


def annotation_from_json(record: dict) -> HumanAnnotation:
    try:
        return HumanAnnotation(
            annotator_id=record["annotator_id"],
            rule_id=record["rule_id"],
            target=record["target"],
            correctness=record["correctness"],
            clarity=record["clarity"],
            logicalness=record["logicalness"],
            preferred=record.get("preferred"),
            **{long: record[short] for short, long in _ANN_FIELDS.items()},
        )
    except KeyError as exc:
        raise RecordError(f"annotation record missing field {exc}") from exc


def append_annotation(path, ann: HumanAnnotation) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(annotation_to_json(ann), sort_keys=True) + "\n")


def read_annotations(path) -> list[HumanAnnotation]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(annotation_from_json(json.loads(line)))
            except (json.JSONDecodeError, RecordError, ValueError) as exc:
                raise RecordError(f"{path}:{lineno}: {exc}") from exc
    return out


@dataclass(frozen=True)
class JudgeScore:
    rule_id: str
    judge_model: str
    generator_model: str
    strategy: str
    score: int

    def __post_init__(self):
        if not 1 <= self.score <= 5:
            raise RecordError("judge score must be in [1, 5]")


def write_judge_scores(path, scores: Iterable[JudgeScore]) -> int:
    rows = sorted(scores, key=lambda s: s.rule_id)
    with open(path, "w", encoding="utf-8") as fh:
        for s in rows:
            fh.write(
                json.dumps(
                    {
                        "rule_id": s.rule_id,
                        "judge_model": s.judge_model,
                        "generator_model": s.generator_model,
                        "strategy": s.strategy,
                        "score": s.score,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    return len(rows)


def read_judge_scores(path) -> list[JudgeScore]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            try:
                out.append(
                    JudgeScore(
                        rule_id=record["rule_id"],
                        judge_model=record["judge_model"],
                        generator_model=record["generator_model"],
                        strategy=record.get("strategy", "chain_of_thought"),
                        score=record["score"],
                    )
                )
            except (KeyError, RecordError) as exc:
                raise RecordError(f"{path}:{lineno}: {exc}") from exc
    return out
