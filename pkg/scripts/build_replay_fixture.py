#!/usr/bin/env python3
"""Regenerate the committed replay fixtures under tests/fixtures/pipeline/.

Runs the full pipeline once in record mode against the deterministic
local stub (tests/stub_llm.py), then writes:
  triples.tsv        the planted fixture knowledge graph
  cassette.jsonl     transcripts for every explain/judge request
  annotations.jsonl  seeded synthetic human annotations for the report step

The committed cassette is what makes the acceptance pipeline run fully
offline and byte-reproducible.
"""

from __future__ import annotations

import json
import random
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from stub_llm import StubLLMServer  # noqa: E402

from kgrex.aggregate import HumanAnnotation  # noqa: E402
from kgrex.records import annotation_to_json, read_explanations  # noqa: E402
from kgrex.synth import planted_pipeline_store  # noqa: E402

FIXTURE_DIR = REPO / "tests" / "fixtures" / "pipeline"
MODELS = ["openai:alpha", "openai:beta"]
SELECT_K = 100
ANNOTATORS = ["a1", "a2", "a3"]
SEED = 20240101


def cli(*args: str) -> None:
    cmd = [sys.executable, "-m", "kgrex.cli", *args]
    subprocess.run(cmd, check=True, cwd=REPO)


def write_triples(path: Path) -> None:
    store = planted_pipeline_store()
    lines = sorted(
        f"{store.entity_name(s)}\t{store.relation_name(r)}\t{store.entity_name(o)}"
        for s, r, o in store.triples
    )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_annotations(path: Path, explanations_path: Path) -> None:
    rng = random.Random(SEED)
    records = read_explanations(explanations_path)
    cot_records = sorted(
        {(r.rule_id, r.model) for r in records if r.strategy == "chain_of_thought"}
    )
    rows = []
    for rule_id, model in cot_records:
        target = f"chain_of_thought@{model}"
        for annotator in ANNOTATORS:
            rows.append(
                HumanAnnotation(
                    annotator_id=annotator,
                    rule_id=rule_id,
                    target=target,
                    correctness=rng.randint(2, 5),
                    clarity=rng.randint(2, 5),
                    missed_entities=rng.randint(0, 1),
                    missed_relations=rng.randint(0, 1),
                    hallucinated_entities=rng.randint(0, 2),
                    hallucinated_relations=rng.randint(0, 1),
                    logicalness=rng.randint(1, 3),
                )
            )
    with path.open("w", encoding="utf-8") as fh:
        for ann in rows:
            fh.write(json.dumps(annotation_to_json(ann), sort_keys=True) + "\n")


def main() -> None:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    triples = FIXTURE_DIR / "triples.tsv"
    cassette = FIXTURE_DIR / "cassette.jsonl"
    annotations = FIXTURE_DIR / "annotations.jsonl"
    if cassette.exists():
        cassette.unlink()
    write_triples(triples)

    with tempfile.TemporaryDirectory() as tmp:
        tmp_path = Path(tmp)
        rules = tmp_path / "rules.tsv"
        top = tmp_path / "top100.tsv"
        explanations = tmp_path / "explanations.jsonl"
        cli("mine", "--triples", str(triples), "--out", str(rules))
        cli(
            "select", "--rules", str(rules), "--triples", str(triples),
            "--k", str(SELECT_K), "--by", "head_coverage", "--out", str(top),
        )
        with StubLLMServer() as stub:
            cli(
                "explain",
                "--rules", str(top), "--triples", str(triples),
                "--out", str(explanations),
                "--strategies", "all",
                *[arg for m in MODELS for arg in ("--model", m)],
                "--cassette", str(cassette), "--cassette-mode", "record",
                "--base-url", stub.url, "--rpm", "1000000",
            )
            cli(
                "judge",
                "--explanations", str(explanations),
                "--rules", str(top), "--triples", str(triples),
                "--judges", ",".join(MODELS),
                "--generators", ",".join(MODELS),
                "--cassette", str(cassette), "--cassette-mode", "record",
                "--base-url", stub.url, "--rpm", "1000000",
                "--out-dir", str(tmp_path / "scores"),
            )
        write_annotations(annotations, explanations)

    n_entries = sum(1 for _ in cassette.open())
    print(f"fixtures written to {FIXTURE_DIR} (cassette entries: {n_entries})")


if __name__ == "__main__":
    main()
