"""Immutable triple store with three-way indexes and atom-matching queries.

The store interns entity and relation strings to dense ids in first
appearance order, deduplicates triples, and is safe for concurrent reads
once built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

from .model import Atom, Constant, Variable


class StoreError(Exception):
    """Raised for malformed or unusable triple input."""


class Triple(NamedTuple):
    subject: int
    relation: int
    object: int


@dataclass(frozen=True)
class LoadSummary:
    path: str
    lines: int
    duplicates: int
    triple_count: int
    entity_count: int
    relation_count: int


def _freeze_index(index: dict[int, dict[int, list[int]]]) -> dict[int, dict[int, tuple[int, ...]]]:
    return {
        a: {b: tuple(sorted(vals)) for b, vals in sub.items()}
        for a, sub in index.items()
    }


class TripleStore:
    """Deduplicated fact set over interned ids, indexed three ways.

    index_spo: subject -> relation -> sorted objects
    index_pos: relation -> object -> sorted subjects
    index_osp: object -> subject -> sorted relations

    ``relation_fact_count[r]`` is the number of stored triples with
    relation ``r`` and serves as the head-coverage denominator.
    """

    def __init__(self, triples: Iterable[tuple[str, str, str]], summary_path: str = "<memory>",
                 lines: int = 0):
        self.entity_names: list[str] = []
        self.entity_ids: dict[str, int] = {}
        self.relation_names: list[str] = []
        self.relation_ids: dict[str, int] = {}

        seen: set[Triple] = set()
        n_lines = 0
        for s, p, o in triples:
            n_lines += 1
            t = Triple(self._intern_entity(s), self._intern_relation(p), self._intern_entity(o))
            seen.add(t)
        if not seen:
            raise StoreError("no triples")

        self.triples: frozenset[Triple] = frozenset(seen)

        spo: dict[int, dict[int, list[int]]] = {}
        pos: dict[int, dict[int, list[int]]] = {}
        osp: dict[int, dict[int, list[int]]] = {}
        pairs: dict[int, list[tuple[int, int]]] = {}
        for s, r, o in seen:
            spo.setdefault(s, {}).setdefault(r, []).append(o)
            pos.setdefault(r, {}).setdefault(o, []).append(s)
            osp.setdefault(o, {}).setdefault(s, []).append(r)
            pairs.setdefault(r, []).append((s, o))

        self.index_spo = _freeze_index(spo)
        self.index_pos = _freeze_index(pos)
        self.index_osp = _freeze_index(osp)
        self.rel_pairs: dict[int, tuple[tuple[int, int], ...]] = {
            r: tuple(sorted(ps)) for r, ps in pairs.items()
        }
        self.relation_fact_count: dict[int, int] = {
            r: len(ps) for r, ps in self.rel_pairs.items()
        }
        self.load_summary = LoadSummary(
            path=summary_path,
            lines=lines or n_lines,
            duplicates=n_lines - len(seen),
            triple_count=len(seen),
            entity_count=len(self.entity_names),
            relation_count=len(self.relation_names),
        )

    def _intern_entity(self, name: str) -> int:
        eid = self.entity_ids.get(name)
        if eid is None:
            eid = len(self.entity_names)
            self.entity_ids[name] = eid
            self.entity_names.append(name)
        return eid

    def _intern_relation(self, name: str) -> int:
        rid = self.relation_ids.get(name)
        if rid is None:
            rid = len(self.relation_names)
            self.relation_ids[name] = rid
            self.relation_names.append(name)
        return rid

    # -- lookups -----------------------------------------------------------

    def entity(self, name: str) -> int | None:
        return self.entity_ids.get(name)

    def relation(self, name: str) -> int | None:
        return self.relation_ids.get(name)

    def entity_name(self, eid: int) -> str:
        return self.entity_names[eid]

    def relation_name(self, rid: int) -> str:
        return self.relation_names[rid]

    def has(self, s: int, r: int, o: int) -> bool:
        objs = self.index_spo.get(s, {}).get(r)
        return objs is not None and o in objs

    def objects(self, s: int, r: int) -> tuple[int, ...]:
        return self.index_spo.get(s, {}).get(r, ())

    def subjects(self, r: int, o: int) -> tuple[int, ...]:
        return self.index_pos.get(r, {}).get(o, ())

    def pairs(self, r: int) -> tuple[tuple[int, int], ...]:
        return self.rel_pairs.get(r, ())

    def __len__(self) -> int:
        return len(self.triples)


def load_triples(path: str | Path, fmt: str = "tsv") -> TripleStore:
    """Load a tab-separated triple dump into a store.

    Each non-blank line must hold exactly three tab-separated fields
    (subject, predicate, object). Duplicate lines collapse into one fact.
    """
    if fmt != "tsv":
        raise StoreError(f"unknown dump format: {fmt!r}")
    path = Path(path)
    if not path.exists():
        raise StoreError(f"triple file not found: {path}")

    rows: list[tuple[str, str, str]] = []
    n_lines = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            n_lines += 1
            fields = line.split("\t")
            if len(fields) != 3:
                raise StoreError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}"
                )
            rows.append((fields[0], fields[1], fields[2]))
    if not rows:
        raise StoreError(f"{path}: no triples")
    return TripleStore(rows, summary_path=str(path), lines=n_lines)


@dataclass(frozen=True)
class TypeCatalog:
    """Entity-to-types map plus the configured mediator (CVT) type labels."""

    entity_types: dict[int, tuple[str, ...]]
    mediator_types: frozenset[str] = frozenset()
    skipped_entities: tuple[str, ...] = ()

    def types_of(self, entity: int) -> tuple[str, ...]:
        return self.entity_types.get(entity, ())


def load_type_catalog(store: TripleStore, path: str | Path | None,
                      mediator_path: str | Path | None = None) -> TypeCatalog:
    """Load an (entity TAB type-label) sidecar and optional mediator config.

    Entities absent from the store's intern table are collected into a
    skip report instead of failing the load.
    """
    entity_types: dict[int, list[str]] = {}
    skipped: list[str] = []
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise StoreError(f"type file not found: {p}")
        with p.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n").rstrip("\r")
                if not line.strip():
                    continue
                fields = line.split("\t")
                if len(fields) != 2:
                    raise StoreError(
                        f"{p}:{lineno}: expected 2 tab-separated fields, got {len(fields)}"
                    )
                name, label = fields
                eid = store.entity(name)
                if eid is None:
                    skipped.append(name)
                    continue
                bucket = entity_types.setdefault(eid, [])
                if label not in bucket:
                    bucket.append(label)

    mediator_types: frozenset[str] = frozenset()
    if mediator_path is not None:
        mp = Path(mediator_path)
        if not mp.exists():
            raise StoreError(f"mediator config not found: {mp}")
        mediator_types = frozenset(
            line.strip() for line in mp.read_text(encoding="utf-8").splitlines() if line.strip()
        )

    return TypeCatalog(
        entity_types={e: tuple(ts) for e, ts in entity_types.items()},
        mediator_types=mediator_types,
        skipped_entities=tuple(skipped),
    )


def match_atom(store: TripleStore, atom: Atom,
               binding: dict[str, int] | None = None) -> Iterator[dict[str, int]]:
    """Yield every extension of ``binding`` under which ``atom`` is a stored fact.

    Extensions come out exactly once, in ascending id order of the newly
    bound values (subject before object). Constants that do not resolve
    in the store simply yield nothing.
    """
    binding = binding or {}

    def resolve(term) -> int | None:
        if isinstance(term, Constant):
            return term.entity
        return binding.get(term.name)

    s = resolve(atom.subject)
    o = resolve(atom.object)
    r = atom.relation

    if s is not None and o is not None:
        if store.has(s, r, o):
            yield dict(binding)
        return

    if s is not None:
        var = atom.object.name
        for obj in store.objects(s, r):
            yield {**binding, var: obj}
        return

    if o is not None:
        var = atom.subject.name
        for subj in store.subjects(r, o):
            yield {**binding, var: subj}
        return

    svar = atom.subject.name
    ovar = atom.object.name
    if svar == ovar:
        for subj, obj in store.pairs(r):
            if subj == obj:
                yield {**binding, svar: subj}
        return
    for subj, obj in store.pairs(r):
        yield {**binding, svar: subj, ovar: obj}
