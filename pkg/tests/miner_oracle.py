"""Exhaustive rule enumerator used as ground truth for miner tests.

Covers the same rule space as the miner by definition (closed, connected,
at most 3 atoms, at most one constant per atom position, pairwise-distinct
body atoms, body may repeat the head) but derives it the hard way:
enumerate every term-pattern shape, every relation assignment, and every
constant tuple observed in the data, then count metrics by full join
scans. No code is shared with the mining engine.

Atoms here are plain tuples (relation, subject, object) with terms
('v', name) for variables and ('c', entity_id) for constants.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import permutations, product


# -- shapes ------------------------------------------------------------------

_VARS = ("v0", "v1", "v2")


def _shape_atoms(symbols: tuple[str, ...]) -> tuple[tuple, ...]:
    """Group a flat slot assignment into atoms; K slots become ('k', index)."""
    out = []
    for i in range(0, len(symbols), 2):
        s = ("k", i) if symbols[i] == "K" else ("v", symbols[i])
        o = ("k", i + 1) if symbols[i + 1] == "K" else ("v", symbols[i + 1])
        out.append((s, o))
    return tuple(out)


def _vars_of(atom) -> set[str]:
    return {t[1] for t in atom if t[0] == "v"}


def _shape_valid(atoms: tuple[tuple, ...]) -> bool:
    # normalized variable order: first occurrences must be v0, v1, v2
    seen: list[str] = []
    occurrences: dict[str, int] = {}
    for s, o in atoms:
        for t in (s, o):
            if t[0] == "v":
                if t[1] not in seen:
                    if t[1] != _VARS[len(seen)]:
                        return False
                    seen.append(t[1])
                occurrences[t[1]] = occurrences.get(t[1], 0) + 1
    if not seen:
        return False
    if any(n < 2 for n in occurrences.values()):
        return False
    if any(not _vars_of(atom) for atom in atoms):
        return False
    # connectivity over shared variables
    reached = {0}
    frontier = _vars_of(atoms[0])
    moved = True
    while moved:
        moved = False
        for i, atom in enumerate(atoms):
            if i not in reached and frontier & _vars_of(atom):
                reached.add(i)
                frontier |= _vars_of(atom)
                moved = True
    return len(reached) == len(atoms)


def _renormalize(atoms: tuple[tuple, ...]) -> tuple[tuple, ...]:
    """Renumber variables in first-appearance order (after a body swap)."""
    mapping: dict[str, str] = {}
    out = []
    for s, o in atoms:
        new = []
        for t in (s, o):
            if t[0] == "v":
                if t[1] not in mapping:
                    mapping[t[1]] = _VARS[len(mapping)]
                new.append(("v", mapping[t[1]]))
            else:
                new.append(t)
        out.append((new[0], new[1]))
    return tuple(out)


def generate_shapes(n_body: int, allow_constants: bool) -> list[tuple[tuple, ...]]:
    """All valid shapes with n_body body atoms plus a head, deduplicated.

    A shape is a tuple of atoms (body first, head last) over variable and
    constant-slot symbols. Body-order mirror images are kept only once.
    """
    n_slots = 2 * (n_body + 1)
    alphabet = _VARS + (("K",) if allow_constants else ())
    shapes = []
    seen = set()
    for symbols in product(alphabet, repeat=n_slots):
        atoms = _shape_atoms(symbols)
        if not _shape_valid(atoms):
            continue
        if n_body == 2:
            swapped = _renormalize((atoms[1], atoms[0], atoms[2]))
            if swapped in seen:
                continue
        seen.add(atoms)
        shapes.append(atoms)
    return shapes


# -- data --------------------------------------------------------------------

class OracleData:
    """Per-relation fact lists and adjacency maps built from raw triples."""

    def __init__(self, triples, n_relations_hint=None):
        self.facts: dict[int, list[tuple[int, int]]] = {}
        self.s2o: dict[int, dict[int, list[int]]] = {}
        self.o2s: dict[int, dict[int, list[int]]] = {}
        self.pair_sets: dict[int, set[tuple[int, int]]] = {}
        for s, r, o in triples:
            if (s, o) in self.pair_sets.setdefault(r, set()):
                continue
            self.pair_sets[r].add((s, o))
            self.facts.setdefault(r, []).append((s, o))
            self.s2o.setdefault(r, {}).setdefault(s, []).append(o)
            self.o2s.setdefault(r, {}).setdefault(o, []).append(s)

    def relations(self) -> list[int]:
        return sorted(self.facts)


def _join(data: OracleData, atoms: list[tuple[int, tuple, tuple]], emit) -> None:
    """Enumerate every grounding of ``atoms``; call emit(assign) per row.

    assign maps term symbols (variable names and constant-slot ids) to
    entity ids. Atoms are scanned in the given order with index lookups
    where a side is already bound.
    """
    assign: dict = {}

    def rec(i: int) -> None:
        if i == len(atoms):
            emit(assign)
            return
        rel, s_term, o_term = atoms[i]
        s_key = s_term[1] if s_term[0] in ("v", "k") else None
        o_key = o_term[1] if o_term[0] in ("v", "k") else None
        s_val = assign.get(s_key) if s_key is not None else s_term[1]
        o_val = assign.get(o_key) if o_key is not None else o_term[1]

        if s_val is not None and o_val is not None:
            if (s_val, o_val) in data.pair_sets.get(rel, ()):
                rec(i + 1)
            return
        if s_val is not None:
            for o in data.s2o.get(rel, {}).get(s_val, ()):
                assign[o_key] = o
                rec(i + 1)
                del assign[o_key]
            return
        if o_val is not None:
            for s in data.o2s.get(rel, {}).get(o_val, ()):
                assign[s_key] = s
                rec(i + 1)
                del assign[s_key]
            return
        if s_key == o_key:
            for s, o in data.facts.get(rel, ()):
                if s == o:
                    assign[s_key] = s
                    rec(i + 1)
                    del assign[s_key]
            return
        for s, o in data.facts.get(rel, ()):
            assign[s_key] = s
            assign[o_key] = o
            rec(i + 1)
            del assign[o_key]
            del assign[s_key]

    rec(0)


def _order_atoms(atoms: list) -> list:
    """Connectivity-first scan order so later atoms arrive partly bound."""
    remaining = list(atoms)
    ordered = [remaining.pop(0)]
    bound = _vars_of((ordered[0][1], ordered[0][2]))
    while remaining:
        best = None
        for atom in remaining:
            shared = len(bound & _vars_of((atom[1], atom[2])))
            if best is None or shared > best[0]:
                best = (shared, atom)
        remaining.remove(best[1])
        ordered.append(best[1])
        bound |= _vars_of((best[1][1], best[1][2]))
    return ordered


def oracle_canonical(body: tuple, head: tuple) -> tuple:
    """Canonical form up to variable renaming and body order."""
    best = None
    for perm in permutations(body):
        mapping: dict[str, int] = {}
        out = []
        for rel, s, o in (head, *perm):
            row = [rel]
            for t in (s, o):
                if t[0] == "v":
                    if t[1] not in mapping:
                        mapping[t[1]] = len(mapping)
                    row.append(("v", mapping[t[1]]))
                else:
                    row.append(t)
            out.append(tuple(row))
        key = (out[0], tuple(out[1:]))
        if best is None or key < best:
            best = key
    return best


def mine_oracle(triples, min_head_coverage: Fraction, min_confidence: Fraction,
                max_atoms: int = 3, allow_constants: bool = True) -> dict:
    """Every qualifying rule with exact metrics.

    Returns {canonical rule: (support, head_coverage, std_confidence)}.
    """
    data = OracleData(triples)
    relations = data.relations()
    results: dict = {}

    for n_body in (1, 2):
        if n_body + 1 > max_atoms:
            continue
        for shape in generate_shapes(n_body, allow_constants):
            body_shape, head_shape = shape[:-1], shape[-1]
            head_k = [t[1] for t in head_shape if t[0] == "k"]
            body_k = sorted(
                {t[1] for atom in body_shape for t in atom if t[0] == "k"}
            )
            all_k = sorted(set(body_k) | set(head_k))
            head_var_syms = [t for t in head_shape if t[0] == "v"]

            for rel_assign in product(relations, repeat=n_body + 1):
                head_rel = rel_assign[-1]
                head_total = len(data.facts[head_rel])
                min_support = -(-min_head_coverage.numerator * head_total
                                // min_head_coverage.denominator)

                full_atoms = _order_atoms(
                    [(rel_assign[i], *shape[i]) for i in range(len(shape))]
                )
                support_sets: dict[tuple, set] = {}

                def emit_full(assign, _ss=support_sets, _hs=head_shape, _ks=all_k):
                    kappa = tuple(assign[k] for k in _ks)
                    pair = tuple(
                        assign[t[1]] if t[0] in ("v", "k") else t[1] for t in _hs
                    )
                    _ss.setdefault(kappa, set()).add(pair)

                _join(data, full_atoms, emit_full)
                if not support_sets:
                    continue
                kept = {
                    kappa: pairs
                    for kappa, pairs in support_sets.items()
                    if len(pairs) >= min_support
                }
                if not kept:
                    continue

                body_atoms = _order_atoms(
                    [(rel_assign[i], *body_shape[i]) for i in range(n_body)]
                )
                body_sets: dict[tuple, set] = {}

                def emit_body(assign, _bs=body_sets, _hv=head_var_syms, _bk=body_k):
                    kappa_b = tuple(assign[k] for k in _bk)
                    _bs.setdefault(kappa_b, set()).add(
                        tuple(assign[t[1]] for t in _hv)
                    )

                _join(data, body_atoms, emit_body)

                k_index = {k: i for i, k in enumerate(all_k)}
                for kappa, pairs in kept.items():
                    supp = len(pairs)
                    hc = Fraction(supp, head_total)
                    if hc < min_head_coverage:
                        continue
                    kappa_b = tuple(kappa[k_index[k]] for k in body_k)
                    denom = len(body_sets[kappa_b])
                    conf = Fraction(supp, denom)
                    if conf < min_confidence:
                        continue

                    def concrete(atom_shape, rel):
                        terms = []
                        for t in atom_shape:
                            if t[0] == "k":
                                terms.append(("c", kappa[k_index[t[1]]]))
                            else:
                                terms.append(t)
                        return (rel, terms[0], terms[1])

                    body = tuple(
                        concrete(body_shape[i], rel_assign[i]) for i in range(n_body)
                    )
                    if len(set(body)) != len(body):
                        continue
                    head = concrete(head_shape, head_rel)
                    key = oracle_canonical(body, head)
                    value = (supp, hc, conf)
                    prior = results.get(key)
                    if prior is not None:
                        assert prior == value, (key, prior, value)
                    results[key] = value
    return results


def atom_to_plain(atom) -> tuple:
    """Convert a kgrex model Atom into this module's tuple representation."""
    def conv(term):
        return ("v", term.name) if hasattr(term, "name") else ("c", term.entity)

    return (atom.relation, conv(atom.subject), conv(atom.object))


def report_to_map(report, store) -> dict:
    """Convert a MiningReport into {canonical: (support, hc, conf)} exactly."""
    out = {}
    for rule in report.rules:
        body = tuple(atom_to_plain(a) for a in rule.body)
        head = atom_to_plain(rule.head)
        key = oracle_canonical(body, head)
        head_total = store.relation_fact_count[rule.head.relation]
        out[key] = (
            rule.support,
            Fraction(rule.support, head_total),
            Fraction(rule.support, rule.body_count),
        )
    return out
