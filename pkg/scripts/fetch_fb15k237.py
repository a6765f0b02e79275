#!/usr/bin/env python3
"""Download FB15k-237 into data/fb15k-237/ for the dataset-gated tests.

The scale-run and parser-corpus acceptance tests skip when this data is
absent; run this script (network required), then re-run pytest.
"""

from __future__ import annotations

import sys
import urllib.request
from pathlib import Path

BASE_URLS = [
    "https://raw.githubusercontent.com/villmow/datasets_knowledge_embedding/master/FB15k-237",
    "https://raw.githubusercontent.com/DeepGraphLearning/KnowledgeGraphEmbedding/master/data/FB15k-237",
]
SPLITS = ["train.txt", "valid.txt", "test.txt"]
TARGET = Path(__file__).resolve().parent.parent / "data" / "fb15k-237"


def fetch(split: str) -> bytes:
    last_error = None
    for base in BASE_URLS:
        url = f"{base}/{split}"
        try:
            with urllib.request.urlopen(url, timeout=60) as resp:
                return resp.read()
        except Exception as exc:  # noqa: BLE001 - try the next mirror
            print(f"  {url}: {exc}")
            last_error = exc
    raise SystemExit(f"could not download {split}: {last_error}")


def main() -> None:
    TARGET.mkdir(parents=True, exist_ok=True)
    for split in SPLITS:
        dest = TARGET / split
        if dest.exists():
            print(f"{dest} already present")
            continue
        print(f"fetching {split} ...")
        dest.write_bytes(fetch(split))
    combined = TARGET / "all.tsv"
    with combined.open("wb") as out:
        for split in SPLITS:
            out.write((TARGET / split).read_bytes())
    n = sum(1 for _ in combined.open())
    print(f"wrote {combined} ({n} lines)")
    if n != 310_116:
        print("warning: expected 310,116 lines for train+valid+test", file=sys.stderr)


if __name__ == "__main__":
    main()
