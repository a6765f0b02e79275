"""Annotation service: JSON API plus optional static UI hosting.

Work items are served in one fixed, seed-shuffled order so every
annotator walks the same queue. Annotations append to a JSONL file with
an idempotency key of (annotator, rule, target); duplicates are rejected
rather than overwritten, which makes the log crash-safe and auditable.
"""

from __future__ import annotations

import random
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .aggregate import HumanAnnotation
from .model import Rule
from .records import append_annotation, annotation_to_json, read_annotations
from .rules import (
    LabelParseError,
    instantiate,
    parse_predicate_label,
    rule_id,
    rule_text,
)
from .signatures import variable_types
from .store import TripleStore, TypeCatalog


class ServerError(ValueError):
    pass


@dataclass(frozen=True)
class WorkItem:
    item_id: str
    rule_id: str
    phase: int
    rule_text: str
    grounding_text: str | None
    variable_types: dict[str, list[str]]
    label_segments: dict[str, list[str]]
    explanations: tuple[dict, ...]

    def targets(self) -> set[str]:
        return {e["target"] for e in self.explanations}

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "rule_id": self.rule_id,
            "phase": self.phase,
            "rule_text": self.rule_text,
            "grounding_text": self.grounding_text,
            "variable_types": self.variable_types,
            "label_segments": self.label_segments,
            "explanations": list(self.explanations),
        }


def _label_segments(store: TripleStore, rule: Rule) -> dict[str, list[str]]:
    """Human-readable segment lists per raw relation label, for UI expansion."""
    out: dict[str, list[str]] = {}
    for rel in rule.relations():
        raw = store.relation_name(rel)
        try:
            parsed = parse_predicate_label(raw)
        except LabelParseError:
            out[raw] = [raw]
            continue
        if hasattr(parsed, "first"):
            out[raw] = [
                parsed.first.domain, parsed.first.type, parsed.first.label,
                parsed.second.domain, parsed.second.type, parsed.second.label,
            ]
        else:
            out[raw] = [parsed.domain, parsed.type, parsed.label]
    return out


def build_work_items(store: TripleStore, rules: Sequence[Rule], explanations,
                     phase: int, catalog: TypeCatalog | None = None,
                     threshold: float = 0.5, seed: int = 0) -> list[WorkItem]:
    """Assemble the shared annotation queue.

    Phase 1 items must carry exactly two explanations (the pairwise
    choice); later phases accept one or more, each rated separately.
    """
    from .prompts import render_grounding

    catalog = catalog or TypeCatalog({})
    by_rule: dict[str, list] = {}
    for record in explanations:
        by_rule.setdefault(record.rule_id, []).append(record)

    items: list[WorkItem] = []
    for rule in rules:
        rid = rule_id(rule, store)
        records = sorted(by_rule.get(rid, []), key=lambda r: (r.strategy, r.model))
        if not records:
            continue
        if phase == 1 and len(records) != 2:
            raise ServerError(
                f"phase-1 item for rule {rid} needs exactly 2 explanations, got {len(records)}"
            )
        grounding = instantiate(rule, store)
        types = variable_types(rule, store, catalog, threshold)
        items.append(
            WorkItem(
                item_id=f"item-{rid}",
                rule_id=rid,
                phase=phase,
                rule_text=rule_text(rule, store),
                grounding_text=(
                    render_grounding(rule, grounding, store) if grounding else None
                ),
                variable_types={vt.variable: list(vt.candidates) for vt in types},
                label_segments=_label_segments(store, rule),
                explanations=tuple(
                    {"target": f"{r.strategy}@{r.model}", "text": r.text}
                    for r in records
                ),
            )
        )
    rng = random.Random(seed)
    rng.shuffle(items)
    return items


class SessionBody(BaseModel):
    annotator_id: str = Field(min_length=1)
    token: str | None = None


class AnnotationBody(BaseModel):
    session_id: str
    item_id: str
    target: str
    correctness: int = Field(ge=1, le=5)
    clarity: int = Field(ge=1, le=5)
    m_ent: int = Field(ge=0)
    m_rel: int = Field(ge=0)
    h_ent: int = Field(ge=0)
    h_rel: int = Field(ge=0)
    logicalness: int = Field(ge=1, le=3)
    preferred: str | None = None


@dataclass
class _Session:
    session_id: str
    annotator_id: str


@dataclass
class AnnotationService:
    items: list[WorkItem]
    annotations_path: Path
    annotator_tokens: dict[str, str] | None = None
    sessions: dict[str, _Session] = field(default_factory=dict)
    completed: dict[str, set[tuple[str, str]]] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def __post_init__(self):
        self.items_by_id = {item.item_id: item for item in self.items}
        if self.annotations_path.exists():
            for ann in read_annotations(self.annotations_path):
                self.completed.setdefault(ann.annotator_id, set()).add(
                    (ann.rule_id, ann.target)
                )

    def open_session(self, annotator_id: str, token: str | None) -> _Session:
        if self.annotator_tokens is not None:
            if self.annotator_tokens.get(annotator_id) != token:
                raise HTTPException(status_code=401, detail="bad annotator token")
        for session in self.sessions.values():
            if session.annotator_id == annotator_id:
                return session
        session = _Session(session_id=uuid.uuid4().hex, annotator_id=annotator_id)
        self.sessions[session.session_id] = session
        return session

    def session(self, session_id: str) -> _Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=401, detail="unknown session")
        return session

    def _item_done(self, annotator_id: str, item: WorkItem) -> bool:
        done = self.completed.get(annotator_id, set())
        if item.phase == 1:
            return any((item.rule_id, t) in done for t in item.targets())
        return all((item.rule_id, t) in done for t in item.targets())

    def next_item(self, annotator_id: str) -> WorkItem | None:
        for item in self.items:
            if not self._item_done(annotator_id, item):
                return item
        return None

    def progress(self, annotator_id: str) -> tuple[int, int]:
        done = sum(1 for item in self.items if self._item_done(annotator_id, item))
        return done, len(self.items)

    def annotate(self, session: _Session, body: AnnotationBody) -> None:
        item = self.items_by_id.get(body.item_id)
        if item is None:
            raise HTTPException(status_code=404, detail="unknown item_id")
        if body.target not in item.targets():
            raise HTTPException(
                status_code=422, detail=f"target {body.target!r} is not part of this item"
            )
        if item.phase == 1:
            if body.preferred is None:
                raise HTTPException(
                    status_code=422, detail="preferred: a phase-1 annotation needs a preference"
                )
            if body.preferred not in item.targets():
                raise HTTPException(
                    status_code=422, detail=f"preferred {body.preferred!r} is not part of this item"
                )
        with self.lock:
            key = (item.rule_id, body.target)
            done = self.completed.setdefault(session.annotator_id, set())
            if key in done:
                raise HTTPException(
                    status_code=409, detail="duplicate submission for this item"
                )
            ann = HumanAnnotation(
                annotator_id=session.annotator_id,
                rule_id=item.rule_id,
                target=body.target,
                correctness=body.correctness,
                clarity=body.clarity,
                missed_entities=body.m_ent,
                missed_relations=body.m_rel,
                hallucinated_entities=body.h_ent,
                hallucinated_relations=body.h_rel,
                logicalness=body.logicalness,
                preferred=body.preferred,
            )
            append_annotation(self.annotations_path, ann)
            done.add(key)


def build_app(items: list[WorkItem], annotations_path: str | Path,
              annotator_tokens: dict[str, str] | None = None,
              static_dir: str | Path | None = None) -> FastAPI:
    service = AnnotationService(
        items=items,
        annotations_path=Path(annotations_path),
        annotator_tokens=annotator_tokens,
    )
    app = FastAPI(title="kgrex annotation service")
    app.state.service = service

    @app.post("/api/session")
    def open_session(body: SessionBody):
        session = service.open_session(body.annotator_id, body.token)
        return {"session_id": session.session_id, "total": len(service.items)}

    @app.get("/api/next")
    def next_item(session_id: str):
        session = service.session(session_id)
        item = service.next_item(session.annotator_id)
        if item is None:
            return {"done": True}
        done, total = service.progress(session.annotator_id)
        return {"done": False, "item": item.to_json(), "position": done, "total": total}

    @app.post("/api/annotate")
    def annotate(body: AnnotationBody):
        session = service.session(body.session_id)
        service.annotate(session, body)
        return {"ok": True}

    @app.get("/api/progress")
    def progress(session_id: str):
        session = service.session(session_id)
        done, total = service.progress(session.annotator_id)
        return {"completed": done, "total": total}

    if static_dir is not None and Path(static_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app
