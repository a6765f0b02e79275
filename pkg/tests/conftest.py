from __future__ import annotations

import pytest

from kgrex.store import TripleStore


def make_store(rows) -> TripleStore:
    """Store from (subject, relation, object) string triples."""
    return TripleStore(list(rows))


@pytest.fixture
def family_store() -> TripleStore:
    """The hand-enumerable married/parent fixture.

    married(a,b); parent(a,c); parent(b,c); parent(a,d).
    For body married(?x,?y) AND parent(?x,?z) with head parent(?y,?z):
    the only grounding through the head is (x=a, y=b, z=c), so support 1;
    parent holds 3 facts, so head coverage 1/3; the body alone yields
    head pairs {(b,c), (b,d)}, so standard confidence 1/2.
    """
    return make_store(
        [
            ("a", "married", "b"),
            ("a", "parent", "c"),
            ("b", "parent", "c"),
            ("a", "parent", "d"),
        ]
    )
