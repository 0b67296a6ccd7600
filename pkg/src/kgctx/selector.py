"""Context selection: relation-cardinality classification plus the sampling
rules that pick entity-neighborhood pairs and relation-context triples for a
query, always excluding the query's own target triple.

All sampling is driven by a caller-owned ``numpy.random.Generator``. The
draw order is part of each function's contract (documented inline) so that
fixed seeds reproduce byte-identical samples, including under parallel
evaluation where every query gets its own derived stream.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from math import ceil
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import UnclassifiableRelationError
from .store import KnowledgeGraph, Query, Triple, neighbors


class CardinalityClass(enum.Enum):
    ONE_TO_ONE = "1-1"
    ONE_TO_MANY = "1-n"
    MANY_TO_ONE = "n-1"
    MANY_TO_MANY = "n-n"

    @property
    def transpose(self) -> "CardinalityClass":
        if self is CardinalityClass.ONE_TO_MANY:
            return CardinalityClass.MANY_TO_ONE
        if self is CardinalityClass.MANY_TO_ONE:
            return CardinalityClass.ONE_TO_MANY
        return self


class Strategy(str, enum.Enum):
    CUSTOMIZED = "customized"
    RANDOM = "random"
    NO_RELATION_CONTEXT = "no-relation-context"


class SelectorConfig(BaseModel):
    """Knobs for context sampling; serialized as part of the run config."""

    model_config = ConfigDict(extra="forbid")

    neighborhood_cap: int = Field(default=50, ge=0)
    relation_cap: int = Field(default=50, ge=0)
    strategy: Strategy = Strategy.CUSTOMIZED
    cardinality_threshold: float = Field(default=1.5, gt=0)
    rng_seed: int = Field(default=0, ge=0)


class NeighborItem(NamedTuple):
    """One sampled neighborhood pair, with provenance ids kept for tests."""

    relation: int
    entity: int
    relation_text: str
    entity_text: str


class RelationContextItem(NamedTuple):
    """One sampled relation-context pair, oriented along the query direction."""

    head: int
    tail: int
    head_text: str
    tail_text: str


@dataclass
class ContextBundle:
    neighborhood: list[NeighborItem]
    relation_context: list[RelationContextItem]


def query_rng(seed: int, query: Query) -> tuple[np.random.Generator, int]:
    """Derive the query's private sampling stream and a model-sampling seed.

    Keyed on (global seed, source, relation, gold) so evaluation order and
    worker scheduling cannot change what any query samples.
    """
    gold_key = 0 if query.gold is None else query.gold + 1
    root = np.random.SeedSequence([seed, query.source, query.relation, gold_key])
    selector_seq, model_seq = root.spawn(2)
    # 52 bits so the seed (plus small chunk offsets) survives a JSON
    # round-trip through IEEE doubles exactly.
    model_seed = int(model_seq.generate_state(1, dtype=np.uint64)[0] >> 12)
    return np.random.Generator(np.random.PCG64(selector_seq)), model_seed


def classify_cardinality(
    kg: KnowledgeGraph, relation: int, threshold: float = 1.5
) -> CardinalityClass:
    """Classify a relation by average fan-out over the train split.

    tph = triples / distinct heads, hpt = triples / distinct tails; both
    compared inclusively against ``threshold``. A reciprocal relation id
    gets the transpose of its base relation's class.
    """
    base = kg.base_relation(relation)
    triples = kg.rel_index.get(base, ())
    if not triples:
        raise UnclassifiableRelationError(
            f"relation {kg.relation_ids[base]!r} has no train triples"
        )
    tph = len(triples) / len({t.head for t in triples})
    hpt = len(triples) / len({t.tail for t in triples})
    if tph <= threshold and hpt <= threshold:
        cls = CardinalityClass.ONE_TO_ONE
    elif tph > threshold and hpt <= threshold:
        cls = CardinalityClass.ONE_TO_MANY
    elif tph <= threshold and hpt > threshold:
        cls = CardinalityClass.MANY_TO_ONE
    else:
        cls = CardinalityClass.MANY_TO_MANY
    return cls.transpose if kg.is_reciprocal(relation) else cls


def _permuted(items: list, rng: np.random.Generator) -> list:
    """Uniform shuffle; one ``rng.permutation(len(items))`` draw."""
    if len(items) < 2:
        return list(items)
    return [items[i] for i in rng.permutation(len(items))]


def _pair_target_triple(kg: KnowledgeGraph, source: int, pair: tuple[int, int]) -> Triple:
    """Base-form triple asserted by a neighbor pair of ``source``."""
    relation, entity = pair
    if kg.is_reciprocal(relation):
        return Triple(entity, kg.base_relation(relation), source)
    return Triple(source, relation, entity)


def sample_entity_neighborhood(
    kg: KnowledgeGraph, query: Query, config: SelectorConfig, rng: np.random.Generator
) -> list[tuple[int, int]]:
    """Sample up to ``neighborhood_cap`` (relation, entity) pairs around the source.

    Customized strategy: pairs are grouped by relation, groups sorted by
    size descending (ties: relation id ascending), then filled round-robin,
    one uniformly random unused pair per group per round, so every relation
    is represented before any repeats. Draw order: one
    ``rng.integers(len(remaining))`` per pick, groups visited in sorted
    order each round. Random strategy: one permutation over all pairs.

    The pair matching the query's own target triple is removed first.
    """
    cap = config.neighborhood_cap
    target = kg.query_target_triple(query)
    pairs = [
        p for p in neighbors(kg, query.source)
        if target is None or _pair_target_triple(kg, query.source, p) != target
    ]
    if cap == 0 or not pairs:
        return []

    if config.strategy is Strategy.RANDOM:
        return _permuted(pairs, rng)[:cap]

    groups: dict[int, list[tuple[int, int]]] = {}
    for pair in pairs:
        groups.setdefault(pair[0], []).append(pair)
    order = sorted(groups, key=lambda rid: (-len(groups[rid]), rid))

    picked: list[tuple[int, int]] = []
    while len(picked) < cap:
        exhausted = True
        for rid in order:
            remaining = groups[rid]
            if not remaining:
                continue
            exhausted = False
            idx = int(rng.integers(len(remaining)))
            picked.append(remaining.pop(idx))
            if len(picked) == cap:
                break
        if exhausted:
            break
    return picked


def _directed_ends(kg: KnowledgeGraph, triple: Triple, relation: int) -> tuple[int, int]:
    return kg.directed_ends(triple, relation)


def _pick_head_priority(
    kg: KnowledgeGraph,
    pool: list[Triple],
    relation: int,
    source: int,
    want: int,
    rng: np.random.Generator,
) -> list[Triple]:
    """1-n rule: source-headed triples first (random order), then random others.

    Draw order: one permutation over the priority sublist, then one over
    the remainder (each skipped when fewer than two elements).
    """
    priority = [t for t in pool if _directed_ends(kg, t, relation)[0] == source]
    rest = [t for t in pool if _directed_ends(kg, t, relation)[0] != source]
    picked = _permuted(priority, rng)[:want]
    if len(picked) < want:
        picked.extend(_permuted(rest, rng)[: want - len(picked)])
    return picked


def _pick_distinct_tails(
    kg: KnowledgeGraph,
    pool: list[Triple],
    relation: int,
    want: int,
    rng: np.random.Generator,
) -> list[Triple]:
    """n-1 rule: one random triple per distinct tail, tails in random order;
    leftover budget filled uniformly from the unpicked remainder.

    Draw order: one permutation over the distinct-tail list, one
    ``rng.integers(len(group))`` per visited tail with two or more triples,
    then one permutation over the remainder when backfilling.
    """
    by_tail: dict[int, list[Triple]] = {}
    for t in pool:
        by_tail.setdefault(_directed_ends(kg, t, relation)[1], []).append(t)
    tails = _permuted(list(by_tail), rng)

    picked: list[Triple] = []
    picked_set: set[Triple] = set()
    for tail in tails[: min(want, len(tails))]:
        group = by_tail[tail]
        choice = group[int(rng.integers(len(group)))] if len(group) > 1 else group[0]
        picked.append(choice)
        picked_set.add(choice)
    if len(picked) < want:
        remainder = [t for t in pool if t not in picked_set]
        picked.extend(_permuted(remainder, rng)[: want - len(picked)])
    return picked


def sample_relation_context(
    kg: KnowledgeGraph, query: Query, config: SelectorConfig, rng: np.random.Generator
) -> list[Triple]:
    """Sample up to ``relation_cap`` train triples sharing the query's relation.

    The candidate pool is every train triple with the query's base relation
    minus the target triple. The customized strategy dispatches on the
    cardinality class of the *directed* query relation (a reciprocal query
    uses the transposed class, with head/tail read along the query
    direction): 1-n prefers triples headed by the query source, n-1 keeps
    tails pairwise distinct first, n-n takes ceil(cap/2) by the 1-n rule
    then the rest by the n-1 rule over the unpicked remainder, 1-1 and the
    Random strategy sample uniformly without replacement.

    Returned triples are in base storage form; orient them with
    ``kg.directed_ends`` when rendering.
    """
    if config.strategy is Strategy.NO_RELATION_CONTEXT:
        return []
    cap = config.relation_cap
    target = kg.query_target_triple(query)
    pool = [t for t in kg.rel_index.get(kg.base_relation(query.relation), ()) if t != target]
    if cap == 0 or not pool:
        return []

    if config.strategy is Strategy.RANDOM:
        return _permuted(pool, rng)[:cap]

    cls = classify_cardinality(kg, query.relation, config.cardinality_threshold)
    if cls is CardinalityClass.ONE_TO_MANY:
        return _pick_head_priority(kg, pool, query.relation, query.source, cap, rng)
    if cls is CardinalityClass.MANY_TO_ONE:
        return _pick_distinct_tails(kg, pool, query.relation, cap, rng)
    if cls is CardinalityClass.MANY_TO_MANY:
        first = _pick_head_priority(kg, pool, query.relation, query.source, ceil(cap / 2), rng)
        taken = set(first)
        rest_pool = [t for t in pool if t not in taken]
        second = _pick_distinct_tails(kg, rest_pool, query.relation, cap - len(first), rng)
        return first + second
    return _permuted(pool, rng)[:cap]


def build_context(
    kg: KnowledgeGraph, query: Query, config: SelectorConfig, rng: np.random.Generator
) -> ContextBundle:
    """Run both samplers and resolve mentions, keeping provenance ids.

    Draw order: neighborhood sampling first, then relation context.
    Relation-context pairs are oriented along the query's direction so a
    reverse query reads its context the same way it reads itself.
    """
    neighborhood = [
        NeighborItem(rid, eid, kg.relation_text(rid), kg.entity_text(eid))
        for rid, eid in sample_entity_neighborhood(kg, query, config, rng)
    ]
    relation_context = []
    for triple in sample_relation_context(kg, query, config, rng):
        head, tail = kg.directed_ends(triple, query.relation)
        relation_context.append(
            RelationContextItem(head, tail, kg.entity_text(head), kg.entity_text(tail))
        )
    return ContextBundle(neighborhood=neighborhood, relation_context=relation_context)
