"""Dominant subject/object types per relation and per-rule variable types.

A relation's signature is the type label carried by the largest fraction
of its distinct subjects (respectively objects). Entities may hold many
types and contribute to each of them; untyped entities stay out of the
denominator. Variable candidate types are collected from the dominant
type of every (relation, position) the variable occupies.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .mining import _as_ratio
from .model import Rule, Variable
from .store import TripleStore, TypeCatalog


class SignatureError(ValueError):
    pass


@dataclass(frozen=True)
class RelationSignature:
    relation: int
    domain_type: tuple[str, Fraction] | None
    range_type: tuple[str, Fraction] | None


@dataclass(frozen=True)
class VariableTypes:
    variable: str
    candidates: tuple[str, ...]


def _dominant_type(entities: set[int], catalog: TypeCatalog,
                   threshold: Fraction) -> tuple[str, Fraction] | None:
    counts: dict[str, int] = {}
    typed = 0
    for e in entities:
        types = catalog.types_of(e)
        if not types:
            continue
        typed += 1
        for t in types:
            counts[t] = counts.get(t, 0) + 1
    if not typed:
        return None
    # highest coverage wins; ties break to the lexicographically smaller label
    best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    coverage = Fraction(best[1], typed)
    if coverage < threshold:
        return None
    return (best[0], coverage)


def relation_signature(relation: int, store: TripleStore, catalog: TypeCatalog,
                       threshold: float | Fraction = 0.5) -> RelationSignature:
    """Dominant domain/range types of a relation, by distinct-entity coverage."""
    pairs = store.pairs(relation)
    if not pairs:
        raise SignatureError(f"relation {relation} has no facts")
    ratio = _as_ratio(threshold)
    subjects = {s for s, _ in pairs}
    objects = {o for _, o in pairs}
    return RelationSignature(
        relation=relation,
        domain_type=_dominant_type(subjects, catalog, ratio),
        range_type=_dominant_type(objects, catalog, ratio),
    )


def variable_types(rule: Rule, store: TripleStore, catalog: TypeCatalog,
                   threshold: float | Fraction = 0.5) -> list[VariableTypes]:
    """Candidate types for each rule variable, in atom order.

    For every position a variable occupies (scanning body atoms then the
    head, subject before object) the occupied relation's dominant type
    for that position is collected; duplicates keep their first slot.
    """
    signatures: dict[int, RelationSignature] = {}

    def sig(relation: int) -> RelationSignature:
        if relation not in signatures:
            signatures[relation] = relation_signature(relation, store, catalog, threshold)
        return signatures[relation]

    out: list[VariableTypes] = []
    for var in rule.variables():
        candidates: list[str] = []
        for atom in rule.atoms():
            for term, side in ((atom.subject, "domain"), (atom.object, "range")):
                if not (isinstance(term, Variable) and term.name == var):
                    continue
                s = sig(atom.relation)
                dom = s.domain_type if side == "domain" else s.range_type
                if dom is not None and dom[0] not in candidates:
                    candidates.append(dom[0])
        out.append(VariableTypes(variable=var, candidates=tuple(candidates)))
    return out


def signatures_tsv(store: TripleStore, catalog: TypeCatalog,
                   threshold: float | Fraction = 0.5) -> str:
    """All relation signatures as TSV rows."""
    lines = ["relation\tdomain_type\tdomain_coverage\trange_type\trange_coverage"]
    for relation in sorted(store.relation_fact_count):
        s = relation_signature(relation, store, catalog, threshold)

        def fmt(part):
            return ("", "") if part is None else (part[0], f"{float(part[1]):.4f}")

        d, dc = fmt(s.domain_type)
        r, rc = fmt(s.range_type)
        lines.append(f"{store.relation_name(relation)}\t{d}\t{dc}\t{r}\t{rc}")
    return "\n".join(lines) + "\n"
