"""Shared fixtures: tiny hand-written graphs and larger synthetic ones."""

from __future__ import annotations

from pathlib import Path

import pytest

from kgctx.datagen import generate_dataset
from kgctx.store import KnowledgeGraph, ingest


def write_dataset(
    root: Path,
    train: list[tuple[str, str, str]],
    valid: list[tuple[str, str, str]] = (),
    test: list[tuple[str, str, str]] = (),
    entity_aliases: dict[str, list[str]] | None = None,
    relation_mentions: dict[str, str] | None = None,
    descriptions: dict[str, str] | None = None,
) -> dict[str, Path]:
    """Write triple/mention files under ``root`` and return their paths.

    Mentions default to the raw identifier itself so tiny test graphs can
    use readable ids like ``("alice", "knows", "bob")`` directly.
    """
    root.mkdir(parents=True, exist_ok=True)
    entities: list[str] = []
    relations: list[str] = []
    for h, r, t in [*train, *valid, *test]:
        for e in (h, t):
            if e not in entities:
                entities.append(e)
        if r not in relations:
            relations.append(r)

    def write_triples(name: str, rows) -> Path:
        path = root / f"{name}.txt"
        path.write_text("".join(f"{h}\t{r}\t{t}\n" for h, r, t in rows), encoding="utf-8")
        return path

    paths = {
        "train": write_triples("train", train),
        "valid": write_triples("valid", valid),
        "test": write_triples("test", test),
    }

    entity_aliases = entity_aliases or {}
    entity_path = root / "entity_mentions.txt"
    with entity_path.open("w", encoding="utf-8") as fh:
        for e in entities:
            aliases = entity_aliases.get(e, [e])
            fh.write(e + "\t" + "\t".join(aliases) + "\n")
    paths["entity_mentions"] = entity_path

    relation_mentions = relation_mentions or {}
    relation_path = root / "relation_mentions.txt"
    with relation_path.open("w", encoding="utf-8") as fh:
        for r in relations:
            fh.write(f"{r}\t{relation_mentions.get(r, r)}\n")
    paths["relation_mentions"] = relation_path

    paths["descriptions"] = None
    if descriptions:
        description_path = root / "descriptions.txt"
        with description_path.open("w", encoding="utf-8") as fh:
            for e, text in descriptions.items():
                fh.write(f"{e}\t{text}\n")
        paths["descriptions"] = description_path

    return paths


def ingest_paths(paths: dict[str, Path]) -> KnowledgeGraph:
    return ingest(
        paths["train"],
        paths["valid"],
        paths["test"],
        paths["entity_mentions"],
        paths["relation_mentions"],
        paths.get("descriptions"),
    )


def build_graph(root: Path, train, valid=(), test=(), **kwargs) -> KnowledgeGraph:
    return ingest_paths(write_dataset(root, train, valid, test, **kwargs))


@pytest.fixture()
def tiny_kg(tmp_path) -> KnowledgeGraph:
    """Six-entity graph with one relation of each rough shape."""
    train = [
        ("alice", "knows", "bob"),
        ("alice", "knows", "carol"),
        ("bob", "knows", "carol"),
        ("alice", "lives_in", "town"),
        ("bob", "lives_in", "town"),
        ("carol", "lives_in", "village"),
        ("alice", "mayor_of", "town"),
    ]
    valid = [("carol", "knows", "alice")]
    test = [("bob", "knows", "alice")]
    return build_graph(
        tmp_path / "tiny",
        train,
        valid,
        test,
        descriptions={"alice": "a person who knows people", "town": "a small town"},
    )


@pytest.fixture(scope="session")
def selector_dataset(tmp_path_factory):
    """500-triple graph with mixed cardinalities for selector property tests."""
    root = tmp_path_factory.mktemp("selector_kg")
    return generate_dataset(
        root, num_entities=60, num_relations=12,
        train=500, valid=30, test=30, seed=11,
    )


@pytest.fixture(scope="session")
def selector_kg(selector_dataset) -> KnowledgeGraph:
    return ingest_paths(selector_dataset)


@pytest.fixture(scope="session")
def smoke_dataset(tmp_path_factory):
    """Denser graph whose relation pools exceed the context caps."""
    root = tmp_path_factory.mktemp("smoke_kg")
    return generate_dataset(
        root, num_entities=100, num_relations=5,
        train=420, valid=30, test=40, seed=23,
    )


@pytest.fixture(scope="session")
def smoke_kg(smoke_dataset) -> KnowledgeGraph:
    return ingest_paths(smoke_dataset)
