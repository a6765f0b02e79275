"""Rule data model: terms, atoms, rules, groundings, and canonical forms."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Variable:
    """A rule variable. Names keep their leading '?'."""

    name: str

    def __post_init__(self):
        if not self.name.startswith("?") or len(self.name) < 2:
            raise ValueError(f"variable name must start with '?': {self.name!r}")


@dataclass(frozen=True)
class Constant:
    """A constant entity, referenced by interned id."""

    entity: int


Term = Variable | Constant


@dataclass(frozen=True)
class Atom:
    """Triple pattern r(subject, object); either position may be a variable."""

    relation: int
    subject: Term
    object: Term
    vars: tuple[str, ...] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(
            self,
            "vars",
            tuple(t.name for t in (self.subject, self.object) if isinstance(t, Variable)),
        )

    def terms(self) -> tuple[Term, Term]:
        return (self.subject, self.object)

    def variables(self) -> tuple[str, ...]:
        return self.vars


class RuleError(ValueError):
    """Raised for structurally invalid rules."""


def _occurrences(atoms: tuple[Atom, ...]) -> dict[str, int]:
    occ: dict[str, int] = {}
    for atom in atoms:
        for term in atom.terms():
            if isinstance(term, Variable):
                occ[term.name] = occ.get(term.name, 0) + 1
    return occ


def is_closed(body: tuple[Atom, ...], head: Atom) -> bool:
    """True when every variable occurs at least twice across all atoms."""
    return all(n >= 2 for n in _occurrences(body + (head,)).values())


def is_connected(body: tuple[Atom, ...], head: Atom) -> bool:
    """True when the atoms form one component under shared variables.

    An atom without variables can never share and therefore disconnects
    any multi-atom rule; a rule with no variables at all is not connected.
    """
    atoms = body + (head,)
    if not any(atom.variables() for atom in atoms):
        return False
    reached = {0}
    frontier_vars = set(atoms[0].variables())
    changed = True
    while changed:
        changed = False
        for i, atom in enumerate(atoms):
            if i in reached:
                continue
            if frontier_vars.intersection(atom.variables()):
                reached.add(i)
                frontier_vars.update(atom.variables())
                changed = True
    return len(reached) == len(atoms)


@dataclass(frozen=True)
class Rule:
    """Horn rule with 1..2 body atoms and a head atom.

    Quality metrics are optional annotations; body_count is the exact
    denominator behind std_confidence and is excluded from equality so
    that a rule parsed back from text compares equal to its source.
    """

    body: tuple[Atom, ...]
    head: Atom
    support: int | None = None
    head_coverage: float | None = None
    std_confidence: float | None = None
    body_count: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 1 <= len(self.body) <= 2:
            raise RuleError(f"rule must have 1 or 2 body atoms, got {len(self.body)}")
        if not is_connected(self.body, self.head):
            raise RuleError("rule is not connected")
        if not is_closed(self.body, self.head):
            raise RuleError("rule is not closed (a variable occurs only once)")

    def atoms(self) -> tuple[Atom, ...]:
        return self.body + (self.head,)

    def atom_count(self) -> int:
        return len(self.body) + 1

    def variables(self) -> tuple[str, ...]:
        """Variable names in first-occurrence order over body then head."""
        seen: list[str] = []
        for atom in self.atoms():
            for name in atom.variables():
                if name not in seen:
                    seen.append(name)
        return tuple(seen)

    def relations(self) -> tuple[int, ...]:
        """Distinct relation ids in body-then-head order."""
        out: list[int] = []
        for atom in self.atoms():
            if atom.relation not in out:
                out.append(atom.relation)
        return tuple(out)


@dataclass(frozen=True)
class Grounding:
    """Total variable assignment under which every rule atom is a stored fact."""

    binding: tuple[tuple[str, int], ...]

    def as_dict(self) -> dict[str, int]:
        return dict(self.binding)


CanonicalKey = tuple


def _perm_key(head: Atom, perm: tuple[Atom, ...]) -> CanonicalKey:
    """Serialize (head, body-in-this-order) with variables renumbered in scan order."""
    mapping: dict[str, int] = {}
    seq = []
    for atom in (head, *perm):
        row = [atom.relation]
        for term in (atom.subject, atom.object):
            if type(term) is Variable:
                idx = mapping.get(term.name)
                if idx is None:
                    idx = len(mapping)
                    mapping[term.name] = idx
                row.append((0, idx))
            else:
                row.append((1, term.entity))
        seq.append(tuple(row))
    return (seq[0], tuple(seq[1:]))


def canonical_key(body: tuple[Atom, ...], head: Atom) -> CanonicalKey:
    """Order-insensitive identity of a rule up to variable renaming.

    Minimizes over body permutations; variables are renumbered in first
    appearance order scanning the head first, then the permuted body.
    """
    return min(_perm_key(head, perm) for perm in itertools.permutations(body))


_CANON_NAMES = "abcdefgh"


def canonicalize(body: tuple[Atom, ...], head: Atom) -> tuple[tuple[Atom, ...], Atom]:
    """Rewrite to canonical variable names ?a, ?b, ... and canonical body order."""
    best_perm = min(
        itertools.permutations(body), key=lambda perm: _perm_key(head, perm)
    )
    mapping: dict[str, str] = {}

    def ren(term: Term) -> Term:
        if isinstance(term, Variable):
            if term.name not in mapping:
                mapping[term.name] = "?" + _CANON_NAMES[len(mapping)]
            return Variable(mapping[term.name])
        return term

    new_head = Atom(head.relation, ren(head.subject), ren(head.object))
    new_body = tuple(Atom(a.relation, ren(a.subject), ren(a.object)) for a in best_perm)
    return new_body, new_head
