"""Deterministic synthetic dataset generator.

Produces tab-separated triple/mention/description files in the same layout
as the public knowledge-graph releases, with controllable entity, relation
and per-split triple counts. Relations cycle through the four cardinality
shapes (many-to-one, one-to-many, many-to-many, one-to-one) so sampled
graphs exercise every selector rule. Same seed, same files, byte for byte.
"""

from __future__ import annotations

from pathlib import Path

import click
import numpy as np

_SYLLABLES = [
    "ba", "ce", "di", "fo", "gu", "ha", "ki", "lo", "mu", "na", "pe", "ri",
    "so", "tu", "va", "wi", "xo", "yu", "za", "bren", "dor", "fal", "gim",
    "hul", "jor", "kel", "lim", "mor", "nev", "oru", "pra", "quil", "ras",
    "sel", "tam", "urn", "vex", "wol", "yar", "zen",
]

_RELATION_PATTERNS = ["{} of", "has {}", "{} in", "member of {}", "{} for"]

_SHAPES = ("n-1", "1-n", "n-n", "1-1")


def _word(rng: np.random.Generator) -> str:
    n = int(rng.integers(2, 4))
    return "".join(_SYLLABLES[int(i)] for i in rng.integers(0, len(_SYLLABLES), size=n))


def _unique_name(rng: np.random.Generator, taken: set[str], words: int = 2) -> str:
    for _ in range(100):
        name = " ".join(_word(rng).capitalize() for _ in range(words))
        if name not in taken:
            taken.add(name)
            return name
    # dense name space; disambiguate with a counter
    base = " ".join(_word(rng).capitalize() for _ in range(words))
    name = f"{base} {len(taken)}"
    taken.add(name)
    return name


class _RelationShape:
    """Head/tail pools realizing one cardinality shape."""

    def __init__(self, shape: str, num_entities: int, rng: np.random.Generator):
        self.shape = shape
        everyone = np.arange(num_entities)
        if shape == "n-1":
            self.heads = everyone
            self.tails = rng.choice(num_entities, size=int(rng.integers(2, 7)), replace=False)
        elif shape == "1-n":
            self.heads = rng.choice(num_entities, size=int(rng.integers(2, 7)), replace=False)
            self.tails = everyone
        elif shape == "n-n":
            k = max(4, num_entities // 3)
            self.heads = rng.choice(num_entities, size=k, replace=False)
            self.tails = rng.choice(num_entities, size=k, replace=False)
        else:  # 1-1
            self.heads = everyone
            self.tails = everyone
            self.used_heads: set[int] = set()
            self.used_tails: set[int] = set()

    def draw(self, rng: np.random.Generator) -> tuple[int, int]:
        if self.shape == "1-1":
            free_h = [int(h) for h in self.heads if int(h) not in self.used_heads]
            free_t = [int(t) for t in self.tails if int(t) not in self.used_tails]
            if free_h and free_t:
                h = free_h[int(rng.integers(len(free_h)))]
                t = free_t[int(rng.integers(len(free_t)))]
                if h != t:
                    self.used_heads.add(h)
                    self.used_tails.add(t)
                    return h, t
        h = int(self.heads[int(rng.integers(len(self.heads)))])
        t = int(self.tails[int(rng.integers(len(self.tails)))])
        return h, t

    def draw_with(self, entity: int, rng: np.random.Generator) -> tuple[int, int]:
        """A triple guaranteed to contain ``entity`` on a shape-legal side."""
        as_head = entity in set(int(h) for h in self.heads)
        as_tail = entity in set(int(t) for t in self.tails)
        if as_head and (not as_tail or rng.integers(2) == 0):
            return entity, int(self.tails[int(rng.integers(len(self.tails)))])
        if as_tail:
            return int(self.heads[int(rng.integers(len(self.heads)))]), entity
        return entity, int(self.tails[int(rng.integers(len(self.tails)))])


def generate_dataset(
    out_dir: str | Path,
    num_entities: int = 100,
    num_relations: int = 5,
    train: int = 400,
    valid: int = 25,
    test: int = 40,
    seed: int = 7,
    description_fraction: float = 0.6,
    alias_fraction: float = 0.2,
) -> dict[str, Path]:
    """Write a complete synthetic dataset and return its file paths.

    Split sizes are exact and all triples are distinct within and across
    splits; every entity and every relation occurs in the train split.
    """
    if train < num_entities:
        raise ValueError("need train >= num_entities so every entity appears in train")
    if train < num_relations:
        raise ValueError("need train >= num_relations so every relation appears in train")
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    taken_names: set[str] = set()
    entity_ids = [f"Q{i + 1}" for i in range(num_entities)]
    entity_names = [_unique_name(rng, taken_names) for _ in range(num_entities)]
    relation_ids = [f"P{i + 1}" for i in range(num_relations)]
    relation_names = [
        _RELATION_PATTERNS[i % len(_RELATION_PATTERNS)].format(_word(rng))
        for i in range(num_relations)
    ]

    shapes = [_RelationShape(_SHAPES[i % len(_SHAPES)], num_entities, rng) for i in range(num_relations)]

    seen: set[tuple[int, int, int]] = set()

    def fresh_triples(count: int, coverage: bool) -> list[tuple[int, int, int]]:
        rows: list[tuple[int, int, int]] = []
        if coverage:
            for e in range(num_entities):
                r = e % num_relations
                for _ in range(200):
                    h, t = shapes[r].draw_with(e, rng)
                    if h != t and (h, r, t) not in seen:
                        seen.add((h, r, t))
                        rows.append((h, r, t))
                        break
                else:
                    raise RuntimeError("could not place coverage triple; space too small")
            for r in range(num_relations):
                if not any(row[1] == r for row in rows):
                    for _ in range(200):
                        h, t = shapes[r].draw(rng)
                        if h != t and (h, r, t) not in seen:
                            seen.add((h, r, t))
                            rows.append((h, r, t))
                            break
        weights = rng.uniform(0.5, 2.0, size=num_relations)
        probs = weights / weights.sum()
        while len(rows) < count:
            r = int(rng.choice(num_relations, p=probs))
            h, t = shapes[r].draw(rng)
            if h != t and (h, r, t) not in seen:
                seen.add((h, r, t))
                rows.append((h, r, t))
        return rows[:count]

    splits = {
        "train": fresh_triples(train, coverage=True),
        "valid": fresh_triples(valid, coverage=False),
        "test": fresh_triples(test, coverage=False),
    }

    paths: dict[str, Path] = {}
    for name, rows in splits.items():
        path = out / f"{name}.txt"
        with path.open("w", encoding="utf-8") as fh:
            for h, r, t in rows:
                fh.write(f"{entity_ids[h]}\t{relation_ids[r]}\t{entity_ids[t]}\n")
        paths[name] = path

    entity_path = out / "entity_mentions.txt"
    with entity_path.open("w", encoding="utf-8") as fh:
        for i, raw in enumerate(entity_ids):
            aliases = [entity_names[i]]
            if rng.random() < alias_fraction:
                aliases.append(_unique_name(rng, taken_names, words=1))
            fh.write(raw + "\t" + "\t".join(aliases) + "\n")
    paths["entity_mentions"] = entity_path

    relation_path = out / "relation_mentions.txt"
    with relation_path.open("w", encoding="utf-8") as fh:
        for raw, name in zip(relation_ids, relation_names):
            fh.write(f"{raw}\t{name}\n")
    paths["relation_mentions"] = relation_path

    description_path = out / "descriptions.txt"
    with description_path.open("w", encoding="utf-8") as fh:
        for i, raw in enumerate(entity_ids):
            if rng.random() < description_fraction:
                text = f"{entity_names[i]} is a {_word(rng)} {_word(rng)} from {_word(rng).capitalize()}."
                fh.write(f"{raw}\t{text}\n")
    paths["descriptions"] = description_path

    return paths


@click.command(help="Generate a synthetic tab-separated triple dataset.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--entities", default=100, show_default=True)
@click.option("--relations", default=5, show_default=True)
@click.option("--train", default=400, show_default=True)
@click.option("--valid", default=25, show_default=True)
@click.option("--test", default=40, show_default=True)
@click.option("--seed", default=7, show_default=True)
def main(out_dir, entities, relations, train, valid, test, seed):
    paths = generate_dataset(
        out_dir, num_entities=entities, num_relations=relations,
        train=train, valid=valid, test=test, seed=seed,
    )
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


if __name__ == "__main__":
    main()
