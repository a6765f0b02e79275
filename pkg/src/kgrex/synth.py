"""Synthetic knowledge-graph generators for experiments and tests.

The random stores are deliberately structured (shared pair pools,
inverses, compositions, hub constants) so that rule mining over them
produces non-trivial rule sets at the default thresholds.
"""

from __future__ import annotations

import random

from .store import TripleStore


def _relation_label(i: int, concatenated: bool = False) -> str:
    if concatenated:
        return f"/dom{i}/type{i}/left{i}./dom{i}/mid{i}/right{i}"
    return f"/dom{i}/type{i}/rel{i}"


def random_store(seed: int, n_relations: int | None = None,
                 n_triples: int | None = None) -> TripleStore:
    """Random store with planted correlations; sizes default from the seed."""
    rng = random.Random(seed)
    if n_relations is None:
        n_relations = rng.randint(3, 10)
    if n_triples is None:
        n_triples = rng.randint(80, 450)
    n_entities = max(30, n_triples // rng.randint(2, 3))

    entities = [f"e{i}" for i in range(n_entities)]
    relations = [
        _relation_label(i, concatenated=(i % 5 == 4)) for i in range(n_relations)
    ]
    hubs = rng.sample(entities, max(1, n_entities // 12))

    def pick_entity() -> str:
        if rng.random() < 0.12:
            return rng.choice(hubs)
        return rng.choice(entities)

    rows: list[tuple[str, str, str]] = []
    base_pairs: list[tuple[str, str]] = []
    per_relation = max(4, n_triples // n_relations)

    for ri, rel in enumerate(relations):
        style = rng.random()
        for _ in range(per_relation):
            if style < 0.3 and base_pairs and rng.random() < 0.4:
                s, o = rng.choice(base_pairs)           # correlated copy
            elif style < 0.45 and base_pairs and rng.random() < 0.4:
                o, s = rng.choice(base_pairs)           # inverse direction
            else:
                s, o = pick_entity(), pick_entity()
            rows.append((s, rel, o))
            if ri == 0:
                base_pairs.append((s, o))
        if rng.random() < 0.3:
            e = rng.choice(entities)
            rows.append((e, rel, e))                    # occasional reflexive fact

    rng.shuffle(rows)
    rows = rows[: max(1, n_triples)]
    return TripleStore(rows)


def planted_pipeline_store(seed: int = 7, n_clusters: int = 4,
                           pairs_per_cluster: int = 14) -> TripleStore:
    """Store engineered to yield well over 100 mined rules.

    Builds clusters of relations over a shared pair pool: within a
    cluster, relations are near-copies or inverses of one another, so
    every ordered pair of them produces high-coverage rules.
    """
    rng = random.Random(seed)
    rows: list[tuple[str, str, str]] = []
    rel_index = 0
    for c in range(n_clusters):
        pool = [
            (f"c{c}s{i}", f"c{c}o{rng.randint(0, pairs_per_cluster // 2)}")
            for i in range(pairs_per_cluster)
        ]
        for k in range(3):
            rel = _relation_label(rel_index, concatenated=(rel_index % 7 == 6))
            rel_index += 1
            keep = [p for p in pool if rng.random() < 0.9]
            for s, o in keep:
                if k == 2:
                    rows.append((o, rel, s))
                else:
                    rows.append((s, rel, o))
    return TripleStore(rows)
