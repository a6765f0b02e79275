"""Closed Horn-rule mining with exact support / coverage / confidence counts.

The search starts from per-relation head atoms and grows rule bodies with
three operators: dangling atoms (one fresh variable), closing atoms (two
existing variables), and constant instantiation (rule-wide substitution
of one variable). States are deduplicated up to variable renaming and
pruned by support, which is anti-monotone under all three operators.

All metric arithmetic is exact: integer counts and Fraction comparisons,
so results are reproducible and directly comparable against exhaustive
enumeration. Join queries are compiled to a fixed atom order with static
binding modes, which keeps the inner loops allocation-free.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .model import (
    Atom,
    CanonicalKey,
    Constant,
    Rule,
    Term,
    Variable,
    canonical_key,
    canonicalize,
)
from .store import TripleStore


class MinerError(ValueError):
    pass


def _as_ratio(value) -> Fraction:
    """Normalize a threshold to an exact rational.

    Floats go through their decimal string form, so 0.1 means exactly
    one tenth rather than its binary approximation.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class MinerConfig:
    min_head_coverage: Fraction = Fraction(1, 10)
    min_confidence: Fraction = Fraction(1, 10)
    max_atoms: int = 3
    allow_constants: bool = True
    max_rules: int | None = None
    worker_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "min_head_coverage", _as_ratio(self.min_head_coverage))
        object.__setattr__(self, "min_confidence", _as_ratio(self.min_confidence))
        if not 0 < self.min_head_coverage <= 1:
            raise MinerError("min_head_coverage must be in (0, 1]")
        if not 0 < self.min_confidence <= 1:
            raise MinerError("min_confidence must be in (0, 1]")
        if self.max_atoms < 2:
            raise MinerError("max_atoms must be at least 2")
        if self.max_atoms > 3:
            raise MinerError("rules beyond 3 atoms are unsupported")
        if self.worker_count < 1:
            raise MinerError("worker_count must be positive")


@dataclass(frozen=True)
class PartialRule:
    """Search state: a head atom plus zero or more (possibly open) body atoms."""

    head: Atom
    body: tuple[Atom, ...] = ()

    def atoms(self) -> tuple[Atom, ...]:
        return self.body + (self.head,)

    def atom_count(self) -> int:
        return len(self.body) + 1

    def variables(self) -> tuple[str, ...]:
        seen: list[str] = []
        for atom in self.atoms():
            for name in atom.vars:
                if name not in seen:
                    seen.append(name)
        return tuple(seen)

    def open_variables(self) -> frozenset[str]:
        """Variables occurring exactly once; a closed rule has none."""
        occ: dict[str, int] = {}
        for atom in self.atoms():
            for name in atom.vars:
                occ[name] = occ.get(name, 0) + 1
        return frozenset(v for v, n in occ.items() if n == 1)


@dataclass
class MiningReport:
    rules: list[Rule]
    explored_states: int
    wall_time_s: float
    per_relation_counts: dict[str, int] = field(default_factory=dict)

    def summary(self, include_timings: bool = True) -> dict:
        out = {
            "rule_count": len(self.rules),
            "explored_states": self.explored_states,
            "per_relation_counts": dict(sorted(self.per_relation_counts.items())),
        }
        if include_timings:
            out["wall_time_s"] = round(self.wall_time_s, 3)
        return out


# -- compiled join engine ----------------------------------------------------
#
# A query is compiled once into an ordered list of steps. Each step knows
# statically which of its positions are already bound when it runs:
#   mode 0: both resolved, membership check only
#   mode 1: subject resolved, object is a new variable
#   mode 2: object resolved, subject is a new variable
#   mode 3: both free, distinct variables
#   mode 4: both free, the same variable (reflexive scan)
# A "spec" is ("c", entity) or ("v", name) for resolved positions.

def _term_spec(term: Term):
    if isinstance(term, Constant):
        return ("c", term.entity)
    return ("v", term.name)


def _compile(store: TripleStore, atoms: Sequence[Atom],
             proj_vars: frozenset[str]) -> tuple[list[tuple], int]:
    """Order atoms greedily and precompute binding modes.

    Returns (steps, split) where split is the step index from which every
    projected variable is already bound.
    """
    remaining = list(atoms)
    bound: set[str] = set()
    ordered: list[Atom] = []
    sizes = store.relation_fact_count
    while remaining:
        best = None
        best_score = None
        for a in remaining:
            unres = len({v for v in a.vars if v not in bound})
            score = (unres, sizes.get(a.relation, 0))
            if best_score is None or score < best_score:
                best, best_score = a, score
        ordered.append(best)
        remaining.remove(best)
        bound.update(best.vars)

    steps: list[tuple] = []
    bound = set()
    for a in ordered:
        s_known = isinstance(a.subject, Constant) or a.subject.name in bound
        o_known = isinstance(a.object, Constant) or a.object.name in bound
        if s_known and o_known:
            steps.append((0, a.relation, _term_spec(a.subject), _term_spec(a.object)))
        elif s_known:
            steps.append((1, a.relation, _term_spec(a.subject), a.object.name))
        elif o_known:
            steps.append((2, a.relation, a.subject.name, _term_spec(a.object)))
        elif a.subject.name == a.object.name:
            steps.append((4, a.relation, a.subject.name, a.subject.name))
        else:
            steps.append((3, a.relation, a.subject.name, a.object.name))
        bound.update(a.vars)
    return steps, _split_index(ordered, proj_vars)


def _split_index(ordered: Sequence[Atom], proj_vars: frozenset[str]) -> int:
    """First step index from which every projected variable is bound."""
    if not proj_vars:
        return 0
    bound: set[str] = set()
    for i, a in enumerate(ordered):
        bound.update(a.vars)
        if proj_vars <= bound:
            return i + 1
    raise MinerError("projection variable missing from atoms")


def _resolve(spec, binding: dict[str, int]) -> int:
    return spec[1] if spec[0] == "c" else binding[spec[1]]


def _exists(store: TripleStore, steps: list[tuple], i: int,
            binding: dict[str, int]) -> bool:
    """Joint satisfiability of the remaining steps (existential check)."""
    if i == len(steps):
        return True
    mode, rel, s_spec, o_spec = steps[i]
    if mode == 0:
        return store.has(_resolve(s_spec, binding), rel, _resolve(o_spec, binding)) \
            and _exists(store, steps, i + 1, binding)
    if mode == 1:
        var = o_spec
        for obj in store.objects(_resolve(s_spec, binding), rel):
            binding[var] = obj
            if _exists(store, steps, i + 1, binding):
                del binding[var]
                return True
        binding.pop(var, None)
        return False
    if mode == 2:
        var = s_spec
        for subj in store.subjects(rel, _resolve(o_spec, binding)):
            binding[var] = subj
            if _exists(store, steps, i + 1, binding):
                del binding[var]
                return True
        binding.pop(var, None)
        return False
    if mode == 4:
        var = s_spec
        for subj, obj in store.pairs(rel):
            if subj == obj:
                binding[var] = subj
                if _exists(store, steps, i + 1, binding):
                    del binding[var]
                    return True
        binding.pop(var, None)
        return False
    svar, ovar = s_spec, o_spec
    for subj, obj in store.pairs(rel):
        binding[svar] = subj
        binding[ovar] = obj
        if _exists(store, steps, i + 1, binding):
            del binding[svar]
            del binding[ovar]
            return True
    binding.pop(svar, None)
    binding.pop(ovar, None)
    return False


def project_join(store: TripleStore, atoms: Sequence[Atom],
                 terms: Sequence[Term]) -> set[tuple[int, ...]]:
    """Distinct value tuples of ``terms`` over all groundings of ``atoms``.

    Once every projected term is resolved, the remaining atoms are only
    checked for joint satisfiability, and already-collected tuples prune
    their whole subtree.
    """
    proj_vars = frozenset(t.name for t in terms if isinstance(t, Variable))
    steps, split = _compile(store, atoms, proj_vars)
    specs = [_term_spec(t) for t in terms]
    results: set[tuple[int, ...]] = set()
    binding: dict[str, int] = {}

    def rec(i: int) -> None:
        if i == split:
            tup = tuple(_resolve(s, binding) for s in specs)
            if tup in results:
                return
            if _exists(store, steps, i, binding):
                results.add(tup)
            return
        mode, rel, s_spec, o_spec = steps[i]
        if mode == 0:
            if store.has(_resolve(s_spec, binding), rel, _resolve(o_spec, binding)):
                rec(i + 1)
        elif mode == 1:
            var = o_spec
            for obj in store.objects(_resolve(s_spec, binding), rel):
                binding[var] = obj
                rec(i + 1)
            binding.pop(var, None)
        elif mode == 2:
            var = s_spec
            for subj in store.subjects(rel, _resolve(o_spec, binding)):
                binding[var] = subj
                rec(i + 1)
            binding.pop(var, None)
        elif mode == 4:
            var = s_spec
            for subj, obj in store.pairs(rel):
                if subj == obj:
                    binding[var] = subj
                    rec(i + 1)
            binding.pop(var, None)
        else:
            svar, ovar = s_spec, o_spec
            for subj, obj in store.pairs(rel):
                binding[svar] = subj
                binding[ovar] = obj
                rec(i + 1)
            binding.pop(svar, None)
            binding.pop(ovar, None)

    rec(0)
    return results


# -- metric counts ---------------------------------------------------------

def support_count(store: TripleStore, body: Sequence[Atom], head: Atom) -> int:
    """Distinct (head subject value, head object value) pairs over groundings
    satisfying body and head together. Head constants contribute themselves."""
    atoms = tuple(body) + (head,)
    return len(project_join(store, atoms, (head.subject, head.object)))


def body_pair_count(store: TripleStore, body: Sequence[Atom], head: Atom) -> int:
    """Distinct head-pair values under groundings of the body alone."""
    return len(project_join(store, tuple(body), (head.subject, head.object)))


def support(rule: Rule, store: TripleStore) -> int:
    return support_count(store, rule.body, rule.head)


def head_coverage(rule: Rule, store: TripleStore) -> Fraction:
    count = store.relation_fact_count.get(rule.head.relation)
    if not count:
        raise MinerError("head relation has no facts; head coverage undefined")
    return Fraction(support(rule, store), count)


def std_confidence(rule: Rule, store: TripleStore) -> Fraction:
    denom = body_pair_count(store, rule.body, rule.head)
    if denom == 0:
        raise MinerError("rule body has no instantiation; confidence undefined")
    return Fraction(support(rule, store), denom)


# -- refinement operators ----------------------------------------------------

def _fresh_variable(state: PartialRule) -> Variable:
    used = set(state.variables())
    i = 0
    while f"?v{i}" in used:
        i += 1
    return Variable(f"?v{i}")


def _substitute(atoms: Iterable[Atom], var: str, value: int) -> list[Atom]:
    def sub(term: Term) -> Term:
        if isinstance(term, Variable) and term.name == var:
            return Constant(value)
        return term

    return [Atom(a.relation, sub(a.subject), sub(a.object)) for a in atoms]


def _connected_small(atoms: Sequence[Atom]) -> bool:
    """Connectivity over shared variables, specialized for up to 3 atoms."""
    sets = [set(a.vars) for a in atoms]
    if len(atoms) == 1:
        return bool(sets[0])
    if len(atoms) == 2:
        return bool(sets[0] & sets[1])
    edges = sum((bool(sets[0] & sets[1]), bool(sets[0] & sets[2]), bool(sets[1] & sets[2])))
    return edges >= 2


def instantiation_counts(store: TripleStore, state: PartialRule,
                         var: str) -> dict[int, int]:
    """Support of every child obtained by substituting ``var``, in one join.

    Groups the joint groundings of the state's atoms by the substituted
    variable's value and counts distinct head pairs per group. The count
    for value c equals the substituted child's support exactly.
    """
    head = state.head
    tuples = project_join(
        store, state.atoms(), (Variable(var), head.subject, head.object)
    )
    groups: dict[int, set[tuple[int, int]]] = {}
    for v, hs, ho in tuples:
        groups.setdefault(v, set()).add((hs, ho))
    return {v: len(pairs) for v, pairs in groups.items()}


def _keyed_children(state: PartialRule, store: TripleStore,
                    config: MinerConfig) -> list[tuple[CanonicalKey, PartialRule, int | None]]:
    """(canonical key, child, support-if-known) for each distinct child.

    Instantiation children carry their exact support from the grouped
    join; structural children leave it to the caller.
    """
    out: list[tuple[CanonicalKey, PartialRule, int | None]] = []
    seen: set[CanonicalKey] = set()

    def push(body: tuple[Atom, ...], head: Atom, supp: int | None) -> None:
        key = canonical_key(body, head)
        if key in seen:
            return
        seen.add(key)
        out.append((key, PartialRule(head=head, body=body), supp))

    variables = state.variables()
    relations = sorted(store.relation_fact_count)

    if state.atom_count() < config.max_atoms:
        fresh = _fresh_variable(state)
        for rel in relations:
            for var in variables:
                v = Variable(var)
                # dangling atoms are valid by construction
                push(state.body + (Atom(rel, v, fresh),), state.head, None)
                push(state.body + (Atom(rel, fresh, v),), state.head, None)
            for u in variables:
                for w in variables:
                    atom = Atom(rel, Variable(u), Variable(w))
                    if atom in state.body:
                        continue
                    push(state.body + (atom,), state.head, None)

    if config.allow_constants:
        # constants are only introduced when the instantiated rule keeps
        # threshold-satisfiable support (safe: support is anti-monotone)
        need = _min_support(config, store.relation_fact_count[state.head.relation])
        for var in variables:
            counts = instantiation_counts(store, state, var)
            for value in sorted(v for v, c in counts.items() if c >= need):
                new_atoms = _substitute(state.atoms(), var, value)
                body, head = tuple(new_atoms[:-1]), new_atoms[-1]
                if any(not a.vars for a in new_atoms):
                    continue
                if len(set(body)) != len(body):
                    continue
                if not _connected_small(new_atoms):
                    continue
                push(body, head, counts[value])

    return out


def refine(state: PartialRule, store: TripleStore, config: MinerConfig) -> list[PartialRule]:
    """Children of a search state, deduplicated up to variable renaming.

    Below max_atoms: dangling atoms, closing atoms, and constant
    instantiations. At max_atoms only instantiations remain, since
    substituting a constant does not grow the rule. Structural children
    are not support-filtered; instantiations keep only constants whose
    substituted rule retains threshold-satisfiable support.
    """
    return [child for _, child, _ in _keyed_children(state, store, config)]


# -- search ------------------------------------------------------------------

def _min_support(config: MinerConfig, head_count: int) -> int:
    """Smallest integer support that can still reach min_head_coverage."""
    bound = config.min_head_coverage * head_count
    return int(bound) if bound.denominator == 1 else int(bound) + 1


def mine_head_relation(store: TripleStore, relation: int,
                       config: MinerConfig) -> tuple[list[tuple], int]:
    """Mine all qualifying rules whose head uses ``relation``.

    Returns (emitted, explored_states); emitted entries are
    (canonical_key, body, head, support, body_count) tuples.
    """
    head_count = store.relation_fact_count[relation]
    need = _min_support(config, head_count)

    a, b = Variable("?a"), Variable("?b")
    starts = [PartialRule(head=Atom(relation, a, b)),
              PartialRule(head=Atom(relation, a, a))]

    queue: deque[tuple[PartialRule, int]] = deque()
    seen: set[CanonicalKey] = set()
    for st in starts:
        supp = support_count(store, st.body, st.head)
        if supp >= need:
            seen.add(canonical_key(st.body, st.head))
            queue.append((st, supp))

    emitted: dict[CanonicalKey, tuple] = {}
    explored = 0
    min_conf = config.min_confidence
    min_hc = config.min_head_coverage
    while queue:
        state, supp = queue.popleft()
        explored += 1

        if state.body and not state.open_variables():
            if Fraction(supp, head_count) >= min_hc:
                denom = body_pair_count(store, state.body, state.head)
                if denom and Fraction(supp, denom) >= min_conf:
                    cbody, chead = canonicalize(state.body, state.head)
                    key = canonical_key(cbody, chead)
                    if key not in emitted:
                        emitted[key] = (key, cbody, chead, supp, denom)

        for key, child, child_supp in _keyed_children(state, store, config):
            if key in seen:
                continue
            seen.add(key)
            if child_supp is None:
                child_supp = support_count(store, child.body, child.head)
            if child_supp >= need:
                queue.append((child, child_supp))

    return sorted(emitted.values(), key=lambda e: e[0]), explored


_WORKER_STATE: dict = {}


def _pool_init(store: TripleStore, config: MinerConfig) -> None:
    _WORKER_STATE["store"] = store
    _WORKER_STATE["config"] = config


def _pool_task(relation: int):
    return mine_head_relation(_WORKER_STATE["store"], relation, _WORKER_STATE["config"])


def mine(store: TripleStore, config: MinerConfig | None = None) -> MiningReport:
    """Mine every closed connected rule within the configured thresholds.

    Output is deterministic: rules are sorted by canonical form, and the
    worker count only affects wall time, never content.
    """
    config = config or MinerConfig()
    if len(store) == 0:
        raise MinerError("store is empty")

    relations = sorted(store.relation_fact_count)
    start = time.monotonic()

    if config.worker_count > 1 and len(relations) > 1:
        import multiprocessing as mp

        method = "fork" if "fork" in mp.get_all_start_methods() else "spawn"
        ctx = mp.get_context(method)
        with ctx.Pool(
            processes=min(config.worker_count, len(relations)),
            initializer=_pool_init,
            initargs=(store, config),
        ) as pool:
            results = pool.map(_pool_task, relations)
    else:
        results = [mine_head_relation(store, rel, config) for rel in relations]

    explored = sum(r[1] for r in results)
    entries = [entry for r in results for entry in r[0]]
    entries.sort(key=lambda e: e[0])
    if config.max_rules is not None:
        entries = entries[: config.max_rules]

    rules: list[Rule] = []
    per_relation: dict[str, int] = {}
    for _, body, head, supp, denom in entries:
        head_count = store.relation_fact_count[head.relation]
        rules.append(
            Rule(
                body=body,
                head=head,
                support=supp,
                head_coverage=float(Fraction(supp, head_count)),
                std_confidence=float(Fraction(supp, denom)),
                body_count=denom,
            )
        )
        name = store.relation_name(head.relation)
        per_relation[name] = per_relation.get(name, 0) + 1

    return MiningReport(
        rules=rules,
        explored_states=explored,
        wall_time_s=time.monotonic() - start,
        per_relation_counts=per_relation,
    )
