"""Knowledge-graph storage: interning, split sets, indexes and text tables.

Triples are stored in base form (head, relation, tail) with dense integer
ids. Every base relation ``r`` has a reciprocal directed counterpart with
id ``r + num_base_relations``; reading an edge backwards uses the
reciprocal id. The graph is immutable after :func:`ingest` and safe to
share across threads.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import MissingMentionError, SnapshotError, TripleParseError, DataError

logger = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")

DEFAULT_RECIPROCAL_PREFIX = "reverse of "

_SNAPSHOT_MAGIC = b"KGXS"
_SNAPSHOT_VERSION = 1


class Triple(NamedTuple):
    """One stored fact; ``relation`` is always a base relation id."""

    head: int
    relation: int
    tail: int


@dataclass(frozen=True)
class Query:
    """A directed prediction task: find the entity completing (source, relation, ?).

    ``relation`` may be reciprocal, in which case the answer is the head of
    the underlying base triple. ``gold`` is set during training/evaluation.
    """

    source: int
    relation: int
    gold: int | None = None


def normalize_text(text: str) -> str:
    """Collapse runs of whitespace and strip the ends."""
    return " ".join(text.split())


def normalize_key(text: str) -> str:
    """Normalization used when matching generated text against mentions."""
    return normalize_text(text).casefold()


@dataclass
class MentionTable:
    """Surface text for entities and relations.

    ``entity_aliases[e][0]`` is the canonical mention used for rendering;
    all aliases participate in mapping model output back to entities.
    Reciprocal relations have no stored mention: their text is the base
    mention behind ``reciprocal_prefix``.
    """

    entity_aliases: tuple[tuple[str, ...], ...]
    relation_mentions: tuple[str, ...]
    descriptions: dict[int, str] = field(default_factory=dict)
    reciprocal_prefix: str = DEFAULT_RECIPROCAL_PREFIX
    _alias_lookup: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        lookup: dict[str, int] = {}
        collisions = 0
        for eid, aliases in enumerate(self.entity_aliases):
            for alias in aliases:
                key = normalize_key(alias)
                if key in lookup and lookup[key] != eid:
                    collisions += 1  # first mapping wins
                    continue
                lookup[key] = eid
        if collisions:
            logger.warning("mention table: %d alias collisions (first entity kept)", collisions)
        object.__setattr__(self, "_alias_lookup", lookup)

    def entity_for_text(self, text: str) -> int | None:
        return self._alias_lookup.get(normalize_key(text))


@dataclass
class IngestStats:
    """Counts reported after ingestion, for cross-checking against the dataset's published statistics."""

    num_entities: int
    num_relations: int
    split_counts: dict[str, int]
    duplicates_dropped: dict[str, int]
    cross_split_overlap: dict[str, int]

    def as_dict(self) -> dict:
        return {
            "entities": self.num_entities,
            "relations": self.num_relations,
            "train": self.split_counts["train"],
            "valid": self.split_counts["valid"],
            "test": self.split_counts["test"],
            "duplicates_dropped": dict(self.duplicates_dropped),
            "cross_split_overlap": dict(self.cross_split_overlap),
        }


class KnowledgeGraph:
    """Interned, indexed, immutable view of one dataset.

    Built by :func:`ingest` or :func:`load_snapshot`; do not mutate after
    construction. All adjacency indexes cover the train split only, so
    context sampling cannot leak evaluation facts; the filter index covers
    all three splits, as filtered ranking requires.
    """

    def __init__(
        self,
        entity_ids: tuple[str, ...],
        relation_ids: tuple[str, ...],
        splits: dict[str, tuple[Triple, ...]],
        mentions: MentionTable,
        stats: IngestStats,
    ):
        self.entity_ids = entity_ids
        self.relation_ids = relation_ids
        self.entity_index = {raw: i for i, raw in enumerate(entity_ids)}
        self.relation_index = {raw: i for i, raw in enumerate(relation_ids)}
        self.splits = splits
        self.split_sets = {name: frozenset(ts) for name, ts in splits.items()}
        self.mentions = mentions
        self.stats = stats
        self._build_indexes()

    # -- id helpers ------------------------------------------------------

    @property
    def num_entities(self) -> int:
        return len(self.entity_ids)

    @property
    def num_base_relations(self) -> int:
        return len(self.relation_ids)

    def is_reciprocal(self, relation: int) -> bool:
        return relation >= self.num_base_relations

    def reciprocal(self, relation: int) -> int:
        r = self.num_base_relations
        return relation - r if relation >= r else relation + r

    def base_relation(self, relation: int) -> int:
        r = self.num_base_relations
        return relation - r if relation >= r else relation

    def directed_ends(self, triple: Triple, relation: int) -> tuple[int, int]:
        """(source, destination) of ``triple`` read along directed ``relation``."""
        if self.is_reciprocal(relation):
            return triple.tail, triple.head
        return triple.head, triple.tail

    def query_target_triple(self, query: Query) -> Triple | None:
        """Base-form triple asserted by a query with known gold."""
        if query.gold is None:
            return None
        if self.is_reciprocal(query.relation):
            return Triple(query.gold, self.base_relation(query.relation), query.source)
        return Triple(query.source, query.relation, query.gold)

    # -- text helpers ----------------------------------------------------

    def entity_text(self, entity: int) -> str:
        return self.mentions.entity_aliases[entity][0]

    def relation_text(self, relation: int) -> str:
        base = self.mentions.relation_mentions[self.base_relation(relation)]
        if self.is_reciprocal(relation):
            return self.mentions.reciprocal_prefix + base
        return base

    def description(self, entity: int) -> str | None:
        return self.mentions.descriptions.get(entity)

    def entity_for_text(self, text: str) -> int | None:
        return self.mentions.entity_for_text(text)

    # -- indexes ---------------------------------------------------------

    def _build_indexes(self) -> None:
        nbr: dict[int, list[tuple[int, int]]] = {}
        out: dict[tuple[int, int], list[int]] = {}
        rel: dict[int, list[Triple]] = {}
        r_off = self.num_base_relations
        for h, r, t in self.splits["train"]:
            nbr.setdefault(h, []).append((r, t))
            nbr.setdefault(t, []).append((r + r_off, h))
            out.setdefault((h, r), []).append(t)
            out.setdefault((t, r + r_off), []).append(h)
            rel.setdefault(r, []).append(Triple(h, r, t))
        self.neighbor_index: dict[int, tuple[tuple[int, int], ...]] = {
            e: tuple(sorted(pairs)) for e, pairs in nbr.items()
        }
        self.out_index: dict[tuple[int, int], tuple[int, ...]] = {
            key: tuple(sorted(es)) for key, es in out.items()
        }
        self.rel_index: dict[int, tuple[Triple, ...]] = {r: tuple(ts) for r, ts in rel.items()}

        flt: dict[tuple[int, int], set[int]] = {}
        for split in SPLITS:
            for h, r, t in self.splits[split]:
                flt.setdefault((h, r), set()).add(t)
                flt.setdefault((t, r + r_off), set()).add(h)
        self._filter_index: dict[tuple[int, int], frozenset[int]] = {
            key: frozenset(es) for key, es in flt.items()
        }


# -- operations ----------------------------------------------------------


def neighbors(kg: KnowledgeGraph, entity: int) -> tuple[tuple[int, int], ...]:
    """All train-split (relation, entity) pairs around ``entity``, both directions.

    Incoming edges appear under the reciprocal relation id. Order is
    deterministic: (relation id, entity id) ascending.
    """
    return kg.neighbor_index.get(entity, ())


def filter_set(kg: KnowledgeGraph, source: int, relation: int) -> frozenset[int]:
    """Entities completing (source, relation, ?) in any of the three splits."""
    return kg._filter_index.get((source, relation), frozenset())


def directed_queries(kg: KnowledgeGraph, split: str) -> list[Query]:
    """Two queries per stored triple: tail prediction, then head prediction.

    Order is deterministic: triples in file order, forward before reverse.
    """
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    r_off = kg.num_base_relations
    out: list[Query] = []
    for h, r, t in kg.splits[split]:
        out.append(Query(source=h, relation=r, gold=t))
        out.append(Query(source=t, relation=r + r_off, gold=h))
    return out


# -- ingestion -----------------------------------------------------------


def _read_tsv(path: str | Path, expect_cols: int, what: str) -> list[tuple[str, ...]]:
    rows: list[tuple[str, ...]] = []
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) < expect_cols:
                raise TripleParseError(
                    str(path), line_no, f"{what} line has {len(cols)} column(s), expected at least {expect_cols}"
                )
            if expect_cols == 3 and len(cols) != 3:
                raise TripleParseError(str(path), line_no, f"triple line has {len(cols)} columns, expected 3")
            rows.append(tuple(cols))
    return rows


def _read_mention_file(path: str | Path) -> dict[str, tuple[str, ...]]:
    """id -> aliases; extra rows for an id extend its alias list."""
    table: dict[str, list[str]] = {}
    for row in _read_tsv(path, 2, "mention"):
        raw_id, *texts = row
        known = table.setdefault(raw_id, [])
        for text in texts:
            alias = normalize_text(text)
            if alias and alias not in known:
                known.append(alias)
    return {k: tuple(v) for k, v in table.items() if v}


def ingest(
    train_path: str | Path,
    valid_path: str | Path,
    test_path: str | Path,
    entity_mention_path: str | Path,
    relation_mention_path: str | Path,
    description_path: str | Path | None = None,
    reciprocal_prefix: str = DEFAULT_RECIPROCAL_PREFIX,
) -> KnowledgeGraph:
    """Load triple and mention files into an indexed graph.

    Triple files are UTF-8, one ``head\\trelation\\ttail`` per line; mention
    files are ``id\\ttext[\\talias...]``. Entities and relations are interned
    in first-appearance order over train, valid, test. Duplicate triples
    within a split are dropped with a warning; cross-split overlap is
    logged but not fatal. Ids that appear only in valid/test are interned
    like any other.
    """
    raw_splits = {
        "train": _read_tsv(train_path, 3, "triple"),
        "valid": _read_tsv(valid_path, 3, "triple"),
        "test": _read_tsv(test_path, 3, "triple"),
    }
    if not raw_splits["train"]:
        raise DataError(f"train file {train_path} contains no triples")

    entity_ids: list[str] = []
    relation_ids: list[str] = []
    e_index: dict[str, int] = {}
    r_index: dict[str, int] = {}

    def intern_entity(raw: str) -> int:
        if raw not in e_index:
            e_index[raw] = len(entity_ids)
            entity_ids.append(raw)
        return e_index[raw]

    def intern_relation(raw: str) -> int:
        if raw not in r_index:
            r_index[raw] = len(relation_ids)
            relation_ids.append(raw)
        return r_index[raw]

    splits: dict[str, tuple[Triple, ...]] = {}
    duplicates: dict[str, int] = {}
    for name in SPLITS:
        seen: set[Triple] = set()
        kept: list[Triple] = []
        for h_raw, r_raw, t_raw in raw_splits[name]:
            triple = Triple(intern_entity(h_raw), intern_relation(r_raw), intern_entity(t_raw))
            if triple in seen:
                duplicates[name] = duplicates.get(name, 0) + 1
                continue
            seen.add(triple)
            kept.append(triple)
        splits[name] = tuple(kept)
        if duplicates.get(name):
            logger.warning("split %s: dropped %d duplicate triple(s)", name, duplicates[name])

    overlap = {
        "train/valid": len(set(splits["train"]) & set(splits["valid"])),
        "train/test": len(set(splits["train"]) & set(splits["test"])),
        "valid/test": len(set(splits["valid"]) & set(splits["test"])),
    }
    for pair, count in overlap.items():
        if count:
            logger.warning("splits %s share %d triple(s)", pair, count)

    entity_mentions = _read_mention_file(entity_mention_path)
    relation_mentions = _read_mention_file(relation_mention_path)
    missing_e = [raw for raw in entity_ids if raw not in entity_mentions]
    missing_r = [raw for raw in relation_ids if raw not in relation_mentions]
    if missing_e or missing_r:
        raise MissingMentionError(missing_e, missing_r)

    descriptions: dict[int, str] = {}
    if description_path is not None:
        for row in _read_tsv(description_path, 2, "description"):
            raw_id, text = row[0], normalize_text("\t".join(row[1:]))
            if raw_id in e_index and text:
                descriptions[e_index[raw_id]] = text

    mentions = MentionTable(
        entity_aliases=tuple(entity_mentions[raw] for raw in entity_ids),
        relation_mentions=tuple(relation_mentions[raw][0] for raw in relation_ids),
        descriptions=descriptions,
        reciprocal_prefix=reciprocal_prefix,
    )
    stats = IngestStats(
        num_entities=len(entity_ids),
        num_relations=len(relation_ids),
        split_counts={name: len(splits[name]) for name in SPLITS},
        duplicates_dropped={name: duplicates.get(name, 0) for name in SPLITS},
        cross_split_overlap=overlap,
    )
    return KnowledgeGraph(tuple(entity_ids), tuple(relation_ids), splits, mentions, stats)


# -- snapshot ------------------------------------------------------------


def _json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def save_snapshot(kg: KnowledgeGraph, path: str | Path) -> None:
    """Write a self-describing binary snapshot for fast reload.

    Layout: magic, version, u32 header length, JSON header, then the
    sections the header declares (JSON string tables; little-endian int32
    triple arrays). Output is byte-deterministic for a given graph.
    """
    sections: list[tuple[str, bytes]] = [
        ("entity_ids", _json_bytes(list(kg.entity_ids))),
        ("relation_ids", _json_bytes(list(kg.relation_ids))),
        ("entity_aliases", _json_bytes([list(a) for a in kg.mentions.entity_aliases])),
        ("relation_mentions", _json_bytes(list(kg.mentions.relation_mentions))),
        ("descriptions", _json_bytes({str(k): v for k, v in sorted(kg.mentions.descriptions.items())})),
        ("stats", _json_bytes(kg.stats.as_dict())),
    ]
    for name in SPLITS:
        arr = np.asarray(kg.splits[name], dtype="<i4").reshape(-1, 3)
        sections.append((f"triples_{name}", arr.tobytes()))

    header = {
        "version": _SNAPSHOT_VERSION,
        "reciprocal_prefix": kg.mentions.reciprocal_prefix,
        "sections": [{"name": n, "length": len(b)} for n, b in sections],
    }
    header_bytes = _json_bytes(header)
    with Path(path).open("wb") as fh:
        fh.write(_SNAPSHOT_MAGIC)
        fh.write(struct.pack("<HI", _SNAPSHOT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for _, blob in sections:
            fh.write(blob)


def load_snapshot(path: str | Path) -> KnowledgeGraph:
    """Rebuild a graph from :func:`save_snapshot` output."""
    data = Path(path).read_bytes()
    if data[:4] != _SNAPSHOT_MAGIC:
        raise SnapshotError(f"{path}: not a graph snapshot")
    version, header_len = struct.unpack_from("<HI", data, 4)
    if version != _SNAPSHOT_VERSION:
        raise SnapshotError(f"{path}: unsupported snapshot version {version}")
    offset = 4 + struct.calcsize("<HI")
    header = json.loads(data[offset : offset + header_len].decode("utf-8"))
    offset += header_len

    blobs: dict[str, bytes] = {}
    for sect in header["sections"]:
        blobs[sect["name"]] = data[offset : offset + sect["length"]]
        offset += sect["length"]

    def load_json(name: str):
        return json.loads(blobs[name].decode("utf-8"))

    splits: dict[str, tuple[Triple, ...]] = {}
    for name in SPLITS:
        arr = np.frombuffer(blobs[f"triples_{name}"], dtype="<i4").reshape(-1, 3)
        splits[name] = tuple(Triple(int(h), int(r), int(t)) for h, r, t in arr)

    stats_raw = load_json("stats")
    stats = IngestStats(
        num_entities=stats_raw["entities"],
        num_relations=stats_raw["relations"],
        split_counts={name: stats_raw[name] for name in SPLITS},
        duplicates_dropped=stats_raw["duplicates_dropped"],
        cross_split_overlap=stats_raw["cross_split_overlap"],
    )
    mentions = MentionTable(
        entity_aliases=tuple(tuple(a) for a in load_json("entity_aliases")),
        relation_mentions=tuple(load_json("relation_mentions")),
        descriptions={int(k): v for k, v in load_json("descriptions").items()},
        reciprocal_prefix=header["reciprocal_prefix"],
    )
    return KnowledgeGraph(
        tuple(load_json("entity_ids")), tuple(load_json("relation_ids")), splits, mentions, stats
    )
