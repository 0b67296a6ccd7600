#!/usr/bin/env python3
"""Regenerate the checked-in test datasets.

The facsimile under tests/data/facsimile mirrors the published statistics
of FB15K-237-N at 1% scale (131 entities, the full 93-relation vocabulary,
873/70/82 split sizes). Its counts are asserted by the acceptance suite,
so regenerate only with the parameters below; any change to them or to the
generator makes the checked-in files stale.

Usage:
    python3 scripts/make_synthetic_dataset.py [--out DIR]
"""

from __future__ import annotations

import argparse
from pathlib import Path

from kgctx.datagen import generate_dataset

FACSIMILE = dict(
    num_entities=131,
    num_relations=93,
    train=873,
    valid=70,
    test=82,
    seed=1701,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        default=str(Path(__file__).resolve().parent.parent / "tests" / "data" / "facsimile"),
        help="output directory (default: tests/data/facsimile)",
    )
    args = parser.parse_args()
    paths = generate_dataset(Path(args.out), **FACSIMILE)
    for name, path in paths.items():
        print(f"{name}: {path}")


if __name__ == "__main__":
    main()
