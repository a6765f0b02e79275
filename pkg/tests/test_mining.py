from __future__ import annotations

import random
from fractions import Fraction

import pytest

from kgrex.mining import (
    MinerConfig,
    MinerError,
    PartialRule,
    body_pair_count,
    head_coverage,
    mine,
    mine_head_relation,
    refine,
    std_confidence,
    support,
    support_count,
)
from kgrex.model import Atom, Constant, Variable
from kgrex.rules import format_rule, parse_rule
from kgrex.synth import random_store
from miner_oracle import mine_oracle, report_to_map

from conftest import make_store

TENTH = Fraction(1, 10)


def family_rule(store):
    return parse_rule("?x married ?y ?x parent ?z => ?y parent ?z", store)


class TestMetricCounts:
    def test_family_support_by_hand(self, family_store):
        assert support(family_rule(family_store), family_store) == 1

    def test_family_head_coverage(self, family_store):
        assert head_coverage(family_rule(family_store), family_store) == Fraction(1, 3)

    def test_family_confidence(self, family_store):
        assert std_confidence(family_rule(family_store), family_store) == Fraction(1, 2)

    def test_identity_rule_support_is_relation_size(self):
        store = make_store([("a", "r", "b"), ("c", "r", "d")])
        rule = parse_rule("?x r ?y => ?x r ?y", store)
        assert support(rule, store) == 2
        assert head_coverage(rule, store) == 1
        assert std_confidence(rule, store) == 1

    def test_zero_support_with_satisfiable_body(self):
        store = make_store([("a", "r", "b"), ("b", "s", "c")])
        rule = parse_rule("?x s ?y => ?y r ?x", store)
        assert support(rule, store) == 0
        assert std_confidence(rule, store) == 0

    def test_unsatisfiable_body_confidence_undefined(self):
        # s has no reflexive fact, so the body never instantiates
        store = make_store([("a", "r", "a"), ("b", "s", "c")])
        rule = parse_rule("?x s ?x => ?x r ?x", store)
        assert support(rule, store) == 0
        with pytest.raises(MinerError, match="confidence undefined"):
            std_confidence(rule, store)

    def test_head_constant_contributes_to_pair(self):
        store = make_store([("a", "r", "hub"), ("b", "r", "hub"), ("a", "s", "hub")])
        rule = parse_rule("?x r hub => ?x s hub", store)
        assert support(rule, store) == 1   # only (a, hub)
        assert body_pair_count(store, rule.body, rule.head) == 2  # {(a,hub),(b,hub)}

    def test_reflexive_head(self):
        store = make_store([("a", "r", "a"), ("a", "r", "b"), ("a", "s", "a")])
        rule = parse_rule("?x s ?x => ?x r ?x", store)
        assert support(rule, store) == 1


class TestMinerConfig:
    def test_thresholds_are_exact_decimals(self):
        config = MinerConfig(min_head_coverage=0.1, min_confidence=0.1)
        assert config.min_head_coverage == TENTH
        assert config.min_confidence == TENTH

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"min_head_coverage": 0},
            {"min_head_coverage": 1.5},
            {"min_confidence": -0.2},
            {"max_atoms": 1},
            {"max_atoms": 4},
            {"worker_count": 0},
        ],
    )
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(MinerError):
            MinerConfig(**kwargs)


class TestRefine:
    def test_dangling_children_for_fresh_relation(self):
        store = make_store([("a", "r", "b"), ("a", "s", "b")])
        r, s = store.relation("r"), store.relation("s")
        state = PartialRule(head=Atom(r, Variable("?a"), Variable("?b")))
        children = refine(state, store, MinerConfig())
        bodies = {child.body[0] for child in children if child.body}
        fresh = Variable("?v0")
        for expected in (
            Atom(s, Variable("?a"), fresh),
            Atom(s, fresh, Variable("?a")),
            Atom(s, Variable("?b"), fresh),
            Atom(s, fresh, Variable("?b")),
        ):
            assert expected in bodies

    def test_closing_children_bounded_by_two_k(self):
        store = make_store([("a", "r", "b"), ("a", "s", "b"), ("b", "t", "a")])
        r = store.relation("r")
        state = PartialRule(
            head=Atom(r, Variable("?a"), Variable("?b")),
            body=(Atom(store.relation("s"), Variable("?a"), Variable("?b")),),
        )
        children = refine(state, store, MinerConfig(allow_constants=False))
        k = len(store.relation_fact_count)
        closing = [
            c
            for c in children
            if c.atom_count() == 3 and set(c.body[-1].variables()) <= {"?a", "?b"}
            and len(c.body[-1].variables()) == 2
        ]
        distinct_var_closing = [
            c for c in closing if c.body[-1].subject != c.body[-1].object
        ]
        assert len(distinct_var_closing) <= 2 * k

    def test_no_structural_children_at_max_atoms_without_constants(self):
        store = make_store([("a", "r", "b"), ("b", "s", "c"), ("a", "t", "c")])
        state = PartialRule(
            head=Atom(store.relation("t"), Variable("?x"), Variable("?z")),
            body=(
                Atom(store.relation("r"), Variable("?x"), Variable("?y")),
                Atom(store.relation("s"), Variable("?y"), Variable("?z")),
            ),
        )
        assert refine(state, store, MinerConfig(allow_constants=False)) == []

    def test_only_instantiations_at_max_atoms(self):
        store = make_store([("a", "r", "b"), ("b", "s", "c"), ("a", "t", "c")])
        state = PartialRule(
            head=Atom(store.relation("t"), Variable("?x"), Variable("?z")),
            body=(
                Atom(store.relation("r"), Variable("?x"), Variable("?y")),
                Atom(store.relation("s"), Variable("?y"), Variable("?z")),
            ),
        )
        children = refine(state, store, MinerConfig())
        assert children
        assert all(c.atom_count() == 3 for c in children)
        for child in children:
            constants = [
                t
                for atom in child.atoms()
                for t in atom.terms()
                if isinstance(t, Constant)
            ]
            assert constants

    def test_children_deduplicated_up_to_renaming(self):
        store = make_store([("a", "r", "b")])
        state = PartialRule(head=Atom(0, Variable("?a"), Variable("?b")))
        children = refine(state, store, MinerConfig())
        from kgrex.model import canonical_key

        keys = [canonical_key(c.body, c.head) for c in children]
        assert len(keys) == len(set(keys))


class TestMine:
    def test_single_triple_store_with_constants(self):
        store = make_store([("a", "r", "b")])
        report = mine(store, MinerConfig())
        # everything mined from one triple is a trivially satisfied rule
        assert all(r.head_coverage == 1.0 and r.std_confidence == 1.0 for r in report.rules)
        two_atom = sorted(
            format_rule(r, store) for r in report.rules if r.atom_count() == 2
        )
        assert two_atom == [
            "?a r ?b => ?a r ?b\t1.0\t1.0\t1",
            "?a r b => ?a r b\t1.0\t1.0\t1",
            "a r ?a => a r ?a\t1.0\t1.0\t1",
        ]
        got = report_to_map(report, store)
        triples = [(t.subject, t.relation, t.object) for t in store.triples]
        assert got == mine_oracle(triples, TENTH, TENTH)

    def test_single_triple_store_without_constants(self):
        store = make_store([("a", "r", "b")])
        report = mine(store, MinerConfig(allow_constants=False))
        assert [format_rule(r, store) for r in report.rules] == [
            "?a r ?b => ?a r ?b\t1.0\t1.0\t1"
        ]

    def test_family_rule_is_mined_with_exact_metrics(self, family_store):
        report = mine(family_store, MinerConfig())
        by_text = {format_rule(r, family_store): r for r in report.rules}
        hit = [
            r
            for text, r in by_text.items()
            if "married" in text and text.endswith(repr(0.5) + "\t1")
        ]
        assert any(
            r.support == 1 and r.head_coverage == pytest.approx(1 / 3) and r.body_count == 2
            for r in hit
        )

    def test_every_rule_honors_thresholds_and_shape(self):
        store = random_store(11, n_relations=5, n_triples=120)
        report = mine(store, MinerConfig())
        assert report.rules
        for rule in report.rules:
            assert rule.atom_count() <= 3
            head_total = store.relation_fact_count[rule.head.relation]
            assert Fraction(rule.support, head_total) >= TENTH
            assert Fraction(rule.support, rule.body_count) >= TENTH
            assert rule.support <= rule.body_count

    def test_max_rules_cap(self):
        store = random_store(3, n_relations=4, n_triples=80)
        full = mine(store, MinerConfig())
        capped = mine(store, MinerConfig(max_rules=3))
        assert capped.rules == full.rules[:3]

    def test_worker_count_does_not_change_output(self):
        store = random_store(5, n_relations=5, n_triples=100)
        seq = mine(store, MinerConfig(worker_count=1))
        par = mine(store, MinerConfig(worker_count=3))
        assert [format_rule(r, store) for r in seq.rules] == [
            format_rule(r, store) for r in par.rules
        ]


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_small_store_exact_match(self, seed):
        store = random_store(seed, n_relations=4, n_triples=60)
        report = mine(store, MinerConfig())
        got = report_to_map(report, store)
        triples = [(t.subject, t.relation, t.object) for t in store.triples]
        expected = mine_oracle(triples, TENTH, TENTH)
        assert got == expected

    def test_without_constants(self):
        store = random_store(9, n_relations=4, n_triples=80)
        report = mine(store, MinerConfig(allow_constants=False))
        got = report_to_map(report, store)
        triples = [(t.subject, t.relation, t.object) for t in store.triples]
        expected = mine_oracle(triples, TENTH, TENTH, allow_constants=False)
        assert got == expected

    def test_two_atom_only(self):
        store = random_store(13, n_relations=5, n_triples=100)
        report = mine(store, MinerConfig(max_atoms=2))
        got = report_to_map(report, store)
        triples = [(t.subject, t.relation, t.object) for t in store.triples]
        expected = mine_oracle(triples, TENTH, TENTH, max_atoms=2)
        assert got == expected


class TestAntiMonotonicity:
    def test_refinement_never_raises_support(self):
        rng = random.Random(42)
        store = random_store(21, n_relations=5, n_triples=120)
        heads = sorted(store.relation_fact_count)
        frontier = [
            PartialRule(head=Atom(r, Variable("?a"), Variable("?b"))) for r in heads
        ]
        config = MinerConfig()
        checked = 0
        for _ in range(60):
            if not frontier:
                break
            state = frontier.pop(rng.randrange(len(frontier)))
            parent_supp = support_count(store, state.body, state.head)
            children = refine(state, store, config)
            rng.shuffle(children)
            for child in children[:4]:
                child_supp = support_count(store, child.body, child.head)
                assert child_supp <= parent_supp
                checked += 1
                if child.atom_count() < config.max_atoms:
                    frontier.append(child)
        assert checked > 50
