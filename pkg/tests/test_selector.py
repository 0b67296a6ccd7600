"""Context selector: cardinality rules, sampling invariants, determinism."""

from __future__ import annotations

from collections import Counter
from math import ceil, sqrt

import numpy as np
import pytest

from kgctx.errors import UnclassifiableRelationError
from kgctx.selector import (
    CardinalityClass,
    ContextBundle,
    SelectorConfig,
    Strategy,
    build_context,
    classify_cardinality,
    query_rng,
    sample_entity_neighborhood,
    sample_relation_context,
)
from kgctx.store import Query, Triple, directed_queries, neighbors

from conftest import build_graph


def _cfg(**kw) -> SelectorConfig:
    return SelectorConfig(**kw)


# -- per-query rng ----------------------------------------------------------


def test_query_rng_reproducible():
    q = Query(source=3, relation=5, gold=7)
    rng1, seed1 = query_rng(42, q)
    rng2, seed2 = query_rng(42, q)
    assert seed1 == seed2
    assert list(rng1.integers(0, 1000, size=8)) == list(rng2.integers(0, 1000, size=8))


@pytest.mark.parametrize(
    "other",
    [
        Query(source=4, relation=5, gold=7),
        Query(source=3, relation=6, gold=7),
        Query(source=3, relation=5, gold=8),
        Query(source=3, relation=5, gold=None),
    ],
)
def test_query_rng_sensitive_to_query(other):
    base = Query(source=3, relation=5, gold=7)
    rng1, s1 = query_rng(42, base)
    rng2, s2 = query_rng(42, other)
    assert s1 != s2 or list(rng1.integers(0, 10**9, size=4)) != list(rng2.integers(0, 10**9, size=4))


def test_query_rng_sensitive_to_seed():
    q = Query(source=3, relation=5, gold=7)
    _, s1 = query_rng(1, q)
    _, s2 = query_rng(2, q)
    assert s1 != s2


# -- cardinality classification ----------------------------------------------


@pytest.fixture()
def shaped_kg(tmp_path):
    train = [
        # fanout: one head, five tails
        ("h1", "fan_out", "t1"), ("h1", "fan_out", "t2"), ("h1", "fan_out", "t3"),
        ("h1", "fan_out", "t4"), ("h1", "fan_out", "t5"),
        # fanin: five heads, one tail
        ("t1", "fan_in", "h1"), ("t2", "fan_in", "h1"), ("t3", "fan_in", "h1"),
        ("t4", "fan_in", "h1"), ("t5", "fan_in", "h1"),
        # grid: two heads, three tails
        ("h1", "grid", "t1"), ("h1", "grid", "t2"), ("h1", "grid", "t3"),
        ("h2", "grid", "t1"), ("h2", "grid", "t2"), ("h2", "grid", "t3"),
        # pairs: one-to-one
        ("h1", "pairs", "t1"), ("h2", "pairs", "t2"), ("h3", "pairs", "t3"),
        # boundary: 3 triples over 2 heads -> exactly 1.5 triples per head
        ("h1", "edge", "t1"), ("h1", "edge", "t2"), ("h2", "edge", "t3"),
    ]
    return build_graph(tmp_path, train)


def test_classify_basic_shapes(shaped_kg):
    kg = shaped_kg
    assert classify_cardinality(kg, kg.relation_index["fan_out"]) is CardinalityClass.ONE_TO_MANY
    assert classify_cardinality(kg, kg.relation_index["fan_in"]) is CardinalityClass.MANY_TO_ONE
    assert classify_cardinality(kg, kg.relation_index["grid"]) is CardinalityClass.MANY_TO_MANY
    assert classify_cardinality(kg, kg.relation_index["pairs"]) is CardinalityClass.ONE_TO_ONE


def test_classify_threshold_is_inclusive(shaped_kg):
    kg = shaped_kg
    rid = kg.relation_index["edge"]  # 1.5 triples per head, 1.0 per tail
    assert classify_cardinality(kg, rid, threshold=1.5) is CardinalityClass.ONE_TO_ONE
    assert classify_cardinality(kg, rid, threshold=1.4) is CardinalityClass.ONE_TO_MANY


def test_classify_reciprocal_transposes(shaped_kg):
    kg = shaped_kg
    for name in ("fan_out", "fan_in", "grid", "pairs"):
        rid = kg.relation_index[name]
        fwd = classify_cardinality(kg, rid)
        rev = classify_cardinality(kg, kg.reciprocal(rid))
        assert rev is fwd.transpose


def test_classify_matches_independent_recount(selector_kg):
    kg = selector_kg
    for rid in range(kg.num_base_relations):
        rows = [t for t in kg.splits["train"] if t.relation == rid]
        tph = len(rows) / len({h for h, _, _ in rows})
        hpt = len(rows) / len({t for _, _, t in rows})
        many_tails, many_heads = tph > 1.5, hpt > 1.5
        expected = {
            (False, False): CardinalityClass.ONE_TO_ONE,
            (True, False): CardinalityClass.ONE_TO_MANY,
            (False, True): CardinalityClass.MANY_TO_ONE,
            (True, True): CardinalityClass.MANY_TO_MANY,
        }[(many_tails, many_heads)]
        assert classify_cardinality(kg, rid) is expected
        assert classify_cardinality(kg, kg.reciprocal(rid)) is expected.transpose


def test_classify_relation_without_train_triples(tmp_path):
    kg = build_graph(tmp_path, [("a", "r", "b")], valid=[("a", "s", "b")])
    with pytest.raises(UnclassifiableRelationError):
        classify_cardinality(kg, kg.relation_index["s"])


# -- neighborhood sampling ----------------------------------------------------


def _round_robin_counts(group_sizes: list[int], cap: int) -> list[int]:
    """Independent arithmetic model of round-robin fill over sorted groups."""
    counts = [0] * len(group_sizes)
    total = 0
    while total < cap:
        progressed = False
        for i, size in enumerate(group_sizes):
            if counts[i] < size:
                counts[i] += 1
                total += 1
                progressed = True
                if total == cap:
                    break
        if not progressed:
            break
    return counts


def _neighborhood_case(kg, query, cap):
    rng, _ = query_rng(13, query)
    picked = sample_entity_neighborhood(kg, query, _cfg(neighborhood_cap=cap), rng)
    target = kg.query_target_triple(query)
    pool = list(neighbors(kg, query.source))
    if target is not None:
        pool = [
            p for p in pool
            if (Triple(p[1], kg.base_relation(p[0]), query.source)
                if kg.is_reciprocal(p[0]) else Triple(query.source, p[0], p[1])) != target
        ]
    return picked, pool


def test_neighborhood_invariants_across_queries(selector_kg):
    kg = selector_kg
    for cap in (3, 10, 50):
        for query in directed_queries(kg, "train")[:120]:
            picked, pool = _neighborhood_case(kg, query, cap)
            assert len(picked) == min(cap, len(pool))
            assert len(set(picked)) == len(picked)
            assert set(picked) <= set(pool)


def test_neighborhood_counts_follow_round_robin(selector_kg):
    kg = selector_kg
    for cap in (4, 11, 37):
        for query in directed_queries(kg, "train")[:80]:
            picked, pool = _neighborhood_case(kg, query, cap)
            sizes = Counter(r for r, _ in pool)
            order = sorted(sizes, key=lambda rid: (-sizes[rid], rid))
            expected = _round_robin_counts([sizes[r] for r in order], cap)
            observed = Counter(r for r, _ in picked)
            assert [observed.get(r, 0) for r in order] == expected


def test_neighborhood_first_round_relations_distinct(selector_kg):
    kg = selector_kg
    for query in directed_queries(kg, "train")[:150]:
        picked, pool = _neighborhood_case(kg, query, 50)
        n_groups = len({r for r, _ in pool})
        prefix = [r for r, _ in picked[: min(n_groups, 50)]]
        assert len(prefix) == len(set(prefix))


def test_neighborhood_excludes_target_both_directions(tmp_path):
    kg = build_graph(tmp_path, [("a", "r", "b"), ("b", "r", "a"), ("a", "r", "c")])
    rid = kg.relation_index["r"]
    a, b = kg.entity_index["a"], kg.entity_index["b"]
    rng, _ = query_rng(0, Query(a, rid, b))
    fwd = sample_entity_neighborhood(kg, Query(a, rid, b), _cfg(), rng)
    # (r, b) asserts the target (a, r, b); (reciprocal r, b) asserts (b, r, a) and stays
    assert (rid, b) not in fwd
    assert (kg.reciprocal(rid), b) in fwd

    rng, _ = query_rng(0, Query(b, kg.reciprocal(rid), a))
    rev = sample_entity_neighborhood(kg, Query(b, kg.reciprocal(rid), a), _cfg(), rng)
    assert (kg.reciprocal(rid), a) not in rev
    assert (rid, a) in rev


def test_neighborhood_cap_zero_and_isolated_source(tiny_kg):
    rng, _ = query_rng(0, Query(0, 0, None))
    assert sample_entity_neighborhood(tiny_kg, Query(0, 0, None), _cfg(neighborhood_cap=0), rng) == []
    lonely = Query(tiny_kg.num_entities - 1, 0, None)
    rng, _ = query_rng(0, lonely)
    # "village" has exactly one incoming edge
    picked = sample_entity_neighborhood(tiny_kg, lonely, _cfg(), rng)
    assert len(picked) == 1


def test_neighborhood_single_group_pick_is_uniform(tmp_path):
    kg = build_graph(tmp_path, [("hub", "r", f"x{i}") for i in range(4)])
    hub = kg.entity_index["hub"]
    trials = 4000
    counts = Counter()
    for seed in range(trials):
        rng, _ = query_rng(seed, Query(hub, 0, None))
        picked = sample_entity_neighborhood(kg, Query(hub, 0, None), _cfg(neighborhood_cap=1), rng)
        counts[picked[0]] += 1
    expected = trials / 4
    bound = 5 * sqrt(trials * 0.25 * 0.75)
    assert len(counts) == 4
    for pair, n in counts.items():
        assert abs(n - expected) <= bound, (pair, n)


def test_neighborhood_random_strategy_is_permutation_prefix(selector_kg):
    kg = selector_kg
    query = directed_queries(kg, "train")[0]
    rng, _ = query_rng(5, query)
    picked = sample_entity_neighborhood(kg, query, _cfg(strategy=Strategy.RANDOM, neighborhood_cap=10), rng)
    _, pool = _neighborhood_case(kg, query, 10)
    assert len(picked) == min(10, len(pool))
    assert len(set(picked)) == len(picked)
    assert set(picked) <= set(pool)


# -- relation-context sampling -------------------------------------------------


def _context_pool(kg, query):
    target = kg.query_target_triple(query)
    return [t for t in kg.rel_index.get(kg.base_relation(query.relation), ()) if t != target]


def test_relation_context_invariants(selector_kg):
    kg = selector_kg
    for cap in (5, 17, 50):
        for query in directed_queries(kg, "train")[:120]:
            rng, _ = query_rng(3, query)
            picked = sample_relation_context(kg, query, _cfg(relation_cap=cap), rng)
            pool = _context_pool(kg, query)
            assert len(picked) == min(cap, len(pool))
            assert len(set(picked)) == len(picked)
            assert set(picked) <= set(pool)
            assert kg.query_target_triple(query) not in picked


def test_fan_out_rule_prefers_source_headed(tmp_path):
    rows = [("s", "r", f"t{i}") for i in range(6)] + [(f"h{i // 5}", "r", f"u{i}") for i in range(30)]
    kg = build_graph(tmp_path, rows)
    rid = kg.relation_index["r"]
    s = kg.entity_index["s"]
    assert classify_cardinality(kg, rid) is CardinalityClass.ONE_TO_MANY
    query = Query(s, rid, kg.entity_index["t0"])
    rng, _ = query_rng(9, query)
    picked = sample_relation_context(kg, query, _cfg(relation_cap=10), rng)
    priority = [t for t in _context_pool(kg, query) if t.head == s]
    assert len(priority) == 5  # target excluded
    assert set(priority) <= set(picked)
    assert set(picked[:5]) == set(priority)  # priority block comes first


def test_fan_in_rule_prefix_tails_distinct(tmp_path):
    # 30 distinct tails, 200 triples, cap 50: the first 30 picks cover each tail once
    rows = []
    i = 0
    while len(rows) < 200:
        rows.append((f"h{i}", "r", f"t{i % 30}"))
        i += 1
    kg = build_graph(tmp_path, rows)
    rid = kg.relation_index["r"]
    assert classify_cardinality(kg, rid) is CardinalityClass.MANY_TO_ONE
    query = Query(kg.entity_index["h0"], rid, kg.entity_index["t0"])
    rng, _ = query_rng(21, query)
    picked = sample_relation_context(kg, query, _cfg(relation_cap=50), rng)
    assert len(picked) == 50
    prefix_tails = [t.tail for t in picked[:30]]
    assert len(set(prefix_tails)) == 30


def test_fan_in_pick_distribution(tmp_path):
    rows = [(f"h{i}", "r", f"t{i % 2}") for i in range(6)]  # 2 tails x 3 triples
    kg = build_graph(tmp_path, rows)
    rid = kg.relation_index["r"]
    assert classify_cardinality(kg, rid) is CardinalityClass.MANY_TO_ONE
    query = Query(kg.num_entities - 1, rid, None)  # forward, no gold: full pool
    trials = 3000
    counts = Counter()
    for seed in range(trials):
        rng, _ = query_rng(seed, query)
        picked = sample_relation_context(kg, query, _cfg(relation_cap=1), rng)
        counts[picked[0]] += 1
    expected = trials / 6
    bound = 5 * sqrt(trials * (1 / 6) * (5 / 6))
    assert len(counts) == 6
    for triple, n in counts.items():
        assert abs(n - expected) <= bound, (triple, n)


def test_grid_rule_splits_budget(tmp_path):
    rows = [("s", "m", f"t{i}") for i in range(5)]
    rows += [(f"h{i // 4}", "m", f"t{i % 4}") for i in range(12)]
    kg = build_graph(tmp_path, rows)
    rid = kg.relation_index["m"]
    assert classify_cardinality(kg, rid) is CardinalityClass.MANY_TO_MANY
    s = kg.entity_index["s"]
    query = Query(s, rid, kg.entity_index["t0"])
    pool = _context_pool(kg, query)
    for cap in (8, 11, 100):
        rng, _ = query_rng(2, query)
        picked = sample_relation_context(kg, query, _cfg(relation_cap=cap), rng)
        assert len(picked) == min(cap, len(pool))
        assert len(set(picked)) == len(picked)
        first_half = picked[: min(ceil(cap / 2), len(picked))]
        priority = [t for t in pool if t.head == s]
        # source-headed triples fill the first half while any remain
        expected_priority = min(len(priority), len(first_half))
        assert sum(1 for t in first_half if t.head == s) == expected_priority


def test_reciprocal_query_uses_directed_class(tmp_path):
    # base relation is fan-out; its reverse behaves as fan-in over swapped ends
    rows = [(f"h{i % 2}", "r", f"t{i}") for i in range(12)]
    kg = build_graph(tmp_path, rows)
    rid = kg.relation_index["r"]
    assert classify_cardinality(kg, rid) is CardinalityClass.ONE_TO_MANY
    rev = kg.reciprocal(rid)
    assert classify_cardinality(kg, rev) is CardinalityClass.MANY_TO_ONE
    query = Query(kg.entity_index["t0"], rev, kg.entity_index["h0"])
    rng, _ = query_rng(4, query)
    picked = sample_relation_context(kg, query, _cfg(relation_cap=2), rng)
    # directed tails are storage heads; the prefix must keep them distinct
    directed_tails = [kg.directed_ends(t, rev)[1] for t in picked]
    assert len(set(directed_tails)) == 2


def test_relation_context_disabled_strategy(selector_kg):
    query = directed_queries(selector_kg, "train")[0]
    rng, _ = query_rng(0, query)
    cfg = _cfg(strategy=Strategy.NO_RELATION_CONTEXT)
    assert sample_relation_context(selector_kg, query, cfg, rng) == []
    # the neighborhood is unaffected by that strategy
    nb = sample_entity_neighborhood(selector_kg, query, cfg, rng)
    assert nb


def test_relation_context_random_strategy_uniform(tmp_path):
    rows = [(f"h{i}", "r", f"t{i}") for i in range(6)]
    kg = build_graph(tmp_path, rows)
    query = Query(kg.num_entities - 1, kg.relation_index["r"], None)
    trials = 3000
    counts = Counter()
    for seed in range(trials):
        rng, _ = query_rng(seed, query)
        picked = sample_relation_context(
            kg, query, _cfg(strategy=Strategy.RANDOM, relation_cap=2), rng
        )
        assert len(picked) == 2 and picked[0] != picked[1]
        for t in picked:
            counts[t] += 1
    expected = trials / 3  # each triple kept with prob 2/6
    bound = 5 * sqrt(trials * (1 / 3) * (2 / 3))
    for triple, n in counts.items():
        assert abs(n - expected) <= bound, (triple, n)


def test_relation_context_cap_zero(selector_kg):
    query = directed_queries(selector_kg, "train")[0]
    rng, _ = query_rng(0, query)
    assert sample_relation_context(selector_kg, query, _cfg(relation_cap=0), rng) == []


# -- bundle assembly -------------------------------------------------------------


def test_build_context_matches_sequential_draws(selector_kg):
    kg = selector_kg
    for query in directed_queries(kg, "train")[:40]:
        rng1, _ = query_rng(8, query)
        bundle = build_context(kg, query, _cfg(), rng1)
        rng2, _ = query_rng(8, query)
        nb = sample_entity_neighborhood(kg, query, _cfg(), rng2)
        rc = sample_relation_context(kg, query, _cfg(), rng2)
        assert [(i.relation, i.entity) for i in bundle.neighborhood] == nb
        assert [(i.head, i.tail) for i in bundle.relation_context] == [
            kg.directed_ends(t, query.relation) for t in rc
        ]


def test_build_context_texts_and_orientation(tiny_kg):
    kg = tiny_kg
    rid = kg.relation_index["knows"]
    bob = kg.entity_index["bob"]
    alice = kg.entity_index["alice"]
    query = Query(bob, kg.reciprocal(rid), None)
    rng, _ = query_rng(1, query)
    bundle = build_context(kg, query, _cfg(), rng)
    assert isinstance(bundle, ContextBundle)
    for item in bundle.neighborhood:
        assert item.relation_text == kg.relation_text(item.relation)
        assert item.entity_text == kg.entity_text(item.entity)
    # reverse query: context pairs run destination->source of the stored fact
    stored = set(kg.rel_index[rid])
    for item in bundle.relation_context:
        assert Triple(item.tail, rid, item.head) in stored
        assert item.head_text == kg.entity_text(item.head)


def test_build_context_deterministic_per_query(selector_kg):
    kg = selector_kg
    query = directed_queries(kg, "test")[3]
    rng1, _ = query_rng(99, query)
    rng2, _ = query_rng(99, query)
    b1 = build_context(kg, query, _cfg(), rng1)
    b2 = build_context(kg, query, _cfg(), rng2)
    assert b1 == b2
