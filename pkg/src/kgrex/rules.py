"""Parsing, formatting, categorization, and instantiation of Horn rules.

Covers the two predicate-label grammars: standard ``/domain/type/label``
paths and concatenated pairs ``/d1/t1/label1./d2/t2/label2`` produced by
collapsing two edges through a mediator node.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .model import Atom, Constant, Grounding, Rule, Term, Variable
from .store import TripleStore, TypeCatalog, match_atom


class LabelParseError(ValueError):
    pass


class RuleParseError(ValueError):
    pass


@dataclass(frozen=True)
class StandardLabel:
    domain: str
    type: str
    label: str

    def to_string(self) -> str:
        return f"/{self.domain}/{self.type}/{self.label}"


@dataclass(frozen=True)
class ConcatenatedLabel:
    first: StandardLabel
    second: StandardLabel

    def to_string(self) -> str:
        return self.first.to_string() + "." + self.second.to_string()


PredicateLabel = StandardLabel | ConcatenatedLabel

CONCAT_MARKER = "./"


def _parse_standard(raw: str, full: str) -> StandardLabel:
    if not raw.startswith("/"):
        raise LabelParseError(f"predicate label must start with '/': {full!r}")
    segments = raw[1:].split("/")
    if len(segments) < 3 or any(not s for s in segments[:2]) or not segments[2]:
        raise LabelParseError(
            f"predicate label needs at least /domain/type/label segments: {full!r}"
        )
    # Anything beyond the third slash folds into the label component.
    return StandardLabel(segments[0], segments[1], "/".join(segments[2:]))


def parse_predicate_label(raw: str) -> PredicateLabel:
    """Parse a relation identifier into its structured form.

    A concatenated pair splits at the first ``./`` occurrence; each half
    must itself be a standard three-segment path.
    """
    if not raw:
        raise LabelParseError("empty predicate label")
    if CONCAT_MARKER in raw:
        first_raw, rest = raw.split(CONCAT_MARKER, 1)
        first = _parse_standard(first_raw, raw)
        second = _parse_standard("/" + rest, raw)
        if first.label == second.label:
            raise LabelParseError(
                f"concatenated halves must carry distinct labels: {raw!r}"
            )
        return ConcatenatedLabel(first, second)
    return _parse_standard(raw, raw)


def is_concatenated(raw: str) -> bool:
    return CONCAT_MARKER in raw


# -- rule text -------------------------------------------------------------

ARROW = "=>"


def _parse_term(token: str, store: TripleStore) -> Term:
    if token.startswith("?"):
        return Variable(token)
    eid = store.entity(token)
    if eid is None:
        raise RuleParseError(f"unknown constant entity: {token!r}")
    return Constant(eid)


def _parse_atoms(tokens: list[str], store: TripleStore) -> list[Atom]:
    if not tokens or len(tokens) % 3 != 0:
        raise RuleParseError(
            f"malformed atom list: token count {len(tokens)} is not a multiple of 3"
        )
    atoms = []
    for i in range(0, len(tokens), 3):
        s_tok, r_tok, o_tok = tokens[i : i + 3]
        rid = store.relation(r_tok)
        if rid is None:
            raise RuleParseError(f"unknown relation: {r_tok!r}")
        atoms.append(Atom(rid, _parse_term(s_tok, store), _parse_term(o_tok, store)))
    return atoms


def parse_rule(line: str, store: TripleStore) -> Rule:
    """Parse one rule line: body atoms, '=>', head atom, optional metrics.

    Atoms are whitespace-separated (subject, relation, object) token
    triplets. Trailing metric columns, when present, are head coverage,
    standard confidence, and support, in that order.
    """
    tokens = line.split()
    if ARROW not in tokens:
        raise RuleParseError(f"missing '{ARROW}' separator: {line!r}")
    idx = tokens.index(ARROW)
    body = _parse_atoms(tokens[:idx], store)
    rest = tokens[idx + 1 :]
    if len(rest) < 3:
        raise RuleParseError(f"missing head atom after '{ARROW}': {line!r}")
    head = _parse_atoms(rest[:3], store)[0]
    metric_tokens = rest[3:]

    support = head_coverage = std_confidence = None
    if metric_tokens:
        if len(metric_tokens) != 3:
            raise RuleParseError(
                f"expected 3 metric columns (hc, confidence, support), got {len(metric_tokens)}"
            )
        try:
            head_coverage = float(metric_tokens[0])
            std_confidence = float(metric_tokens[1])
            support = int(float(metric_tokens[2]))
        except ValueError as exc:
            raise RuleParseError(f"bad metric column in {line!r}: {exc}") from exc

    return Rule(
        body=tuple(body),
        head=head,
        support=support,
        head_coverage=head_coverage,
        std_confidence=std_confidence,
    )


def _term_token(term: Term, store: TripleStore) -> str:
    if isinstance(term, Variable):
        return term.name
    return store.entity_name(term.entity)


def _atom_tokens(atom: Atom, store: TripleStore) -> str:
    return " ".join(
        (
            _term_token(atom.subject, store),
            store.relation_name(atom.relation),
            _term_token(atom.object, store),
        )
    )


def format_rule(rule: Rule, store: TripleStore) -> str:
    """Render a rule to its line form; parse_rule round-trips the result."""
    parts = [_atom_tokens(a, store) for a in rule.body]
    text = " ".join(parts) + f" {ARROW} " + _atom_tokens(rule.head, store)
    if (
        rule.head_coverage is not None
        and rule.std_confidence is not None
        and rule.support is not None
    ):
        text += f"\t{rule.head_coverage!r}\t{rule.std_confidence!r}\t{rule.support}"
    return text


def rule_text(rule: Rule, store: TripleStore) -> str:
    """Atoms-only rendering, used in prompts and as the stable rule identity."""
    bare = Rule(rule.body, rule.head)
    return format_rule(bare, store)


def rule_id(rule: Rule, store: TripleStore) -> str:
    """Deterministic short id derived from the canonical rule text."""
    from .model import canonicalize

    body, head = canonicalize(rule.body, rule.head)
    text = rule_text(Rule(body, head), store)
    return "r" + hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def write_rules_file(path, rules: Iterable[Rule], store: TripleStore) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rule in rules:
            fh.write(format_rule(rule, store) + "\n")
            n += 1
    return n


def read_rules_file(path, store: TripleStore) -> list[Rule]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.strip():
                out.append(parse_rule(line, store))
    return out


# -- categorization --------------------------------------------------------

BINARY = "binary"
MEDIATOR = "mediator"
CONCATENATED = "concatenated"


@dataclass(frozen=True)
class RuleCategory:
    atom_count: int
    relation_kind: str


def categorize(
    rule: Rule,
    store: TripleStore,
    catalog: TypeCatalog,
    types_by_variable: Mapping[str, Sequence[str]] | None = None,
) -> RuleCategory:
    """Classify a rule for report slicing.

    Concatenated wins whenever any relation label splits at ``./``;
    otherwise a rule is a mediator rule when any variable's inferred
    candidate types intersect the configured mediator set. Without type
    evidence a rule is never classified as mediator.
    """
    kind = BINARY
    if any(is_concatenated(store.relation_name(r)) for r in rule.relations()):
        kind = CONCATENATED
    elif types_by_variable and catalog.mediator_types:
        for var in rule.variables():
            if catalog.mediator_types.intersection(types_by_variable.get(var, ())):
                kind = MEDIATOR
                break
    return RuleCategory(atom_count=rule.atom_count(), relation_kind=kind)


# -- instantiation ---------------------------------------------------------

def _resolve(term: Term, binding: dict[str, int]) -> int:
    if isinstance(term, Constant):
        return term.entity
    return binding[term.name]


def _body_bindings(
    store: TripleStore, atoms: Sequence[Atom], binding: dict[str, int], i: int = 0
) -> Iterator[dict[str, int]]:
    if i == len(atoms):
        yield binding
        return
    for extended in match_atom(store, atoms[i], binding):
        yield from _body_bindings(store, atoms, extended, i + 1)


def instantiate(rule: Rule, store: TripleStore) -> Grounding | None:
    """First grounding in deterministic order, or None.

    Body atoms join left to right with extensions enumerated in
    ascending id order, then the head is checked against the store.
    """
    for binding in _body_bindings(store, rule.body, {}):
        s = _resolve(rule.head.subject, binding)
        o = _resolve(rule.head.object, binding)
        if store.has(s, rule.head.relation, o):
            order = rule.variables()
            return Grounding(tuple((v, binding[v]) for v in order))
    return None
