"""Filtered entity-ranking evaluation.

Per query: sample context, verbalize, draw candidates from the backend,
then rank the gold entity after removing every other known-true completion
(train, valid and test). Ties score their mean rank. A gold entity missing
from the candidate set ranks below every finite candidate; when that
leaves an empty ranking the query's reciprocal rank is 0 by convention
(rank 1 over nothing would reward total failure) and the row is flagged.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Mapping

from .backends.base import SequenceModel, generate_candidates
from .errors import BackendError
from .selector import SelectorConfig, build_context, query_rng
from .store import KnowledgeGraph, Query, directed_queries, filter_set
from .verbalize import (
    DEFAULT_BUDGET,
    DEFAULT_SEPARATOR,
    TokenCounter,
    verbalize,
    whitespace_token_counter,
)

logger = logging.getLogger(__name__)

HITS_KS = (1, 3, 10)

Aggregation = Literal["pooled", "direction-mean"]


@dataclass
class RankingOutcome:
    """Filtered rank for one query."""

    query_id: str
    rank: float
    gold_in_candidates: bool
    filtered_candidate_count: int

    @property
    def degenerate(self) -> bool:
        """Gold absent and nothing left to rank against."""
        return not self.gold_in_candidates and self.filtered_candidate_count == 0

    @property
    def reciprocal_rank(self) -> float:
        return 0.0 if self.degenerate else 1.0 / self.rank

    def hit(self, k: int) -> bool:
        return self.gold_in_candidates and self.rank <= k


@dataclass
class Metrics:
    mrr: float
    hits: dict[int, float]
    query_count: int

    def as_dict(self) -> dict:
        return {
            "mrr": self.mrr,
            **{f"hits_at_{k}": v for k, v in sorted(self.hits.items())},
            "query_count": self.query_count,
        }


def filtered_rank(
    candidates: Mapping[int, float],
    gold: int,
    filter_entities: frozenset[int] | set[int],
    query_id: str = "",
) -> RankingOutcome:
    """Rank ``gold`` among the candidates after filtering known-true entities.

    Every candidate in ``filter_entities`` except gold itself is removed.
    With gold present at score g: rank = (optimistic + pessimistic) / 2
    where optimistic = 1 + #{score > g} and pessimistic = #{score >= g}
    including gold, so tied groups score their mean rank. With gold absent:
    rank = #remaining + 1.
    """
    remaining = {e: s for e, s in candidates.items() if e == gold or e not in filter_entities}
    gold_score = remaining.get(gold)
    if gold_score is None:
        return RankingOutcome(query_id, float(len(remaining) + 1), False, len(remaining))
    higher = sum(1 for s in remaining.values() if s > gold_score)
    at_least = sum(1 for s in remaining.values() if s >= gold_score)
    rank = (1 + higher + at_least) / 2
    return RankingOutcome(query_id, rank, True, len(remaining))


@dataclass
class QueryResult:
    """One evaluated query, rich enough to re-derive the metrics offline."""

    index: int
    query_id: str
    source: str
    relation: str
    direction: str
    gold: str
    outcome: RankingOutcome
    candidates: list[tuple[str, float]] = field(default_factory=list)

    def as_record(self) -> dict:
        return {
            "query_id": self.query_id,
            "source": self.source,
            "relation": self.relation,
            "direction": self.direction,
            "gold": self.gold,
            "rank": self.outcome.rank,
            "gold_in_candidates": self.outcome.gold_in_candidates,
            "filtered_candidate_count": self.outcome.filtered_candidate_count,
            "candidates": [{"entity": e, "logprob": lp} for e, lp in self.candidates],
        }

    @classmethod
    def from_record(cls, record: dict) -> "QueryResult":
        outcome = RankingOutcome(
            query_id=record["query_id"],
            rank=record["rank"],
            gold_in_candidates=record["gold_in_candidates"],
            filtered_candidate_count=record["filtered_candidate_count"],
        )
        return cls(
            index=int(record["query_id"].rsplit("/", 1)[1]),
            query_id=record["query_id"],
            source=record["source"],
            relation=record["relation"],
            direction=record["direction"],
            gold=record["gold"],
            outcome=outcome,
            candidates=[(c["entity"], c["logprob"]) for c in record["candidates"]],
        )


def metrics_from_outcomes(
    results: Iterable[QueryResult],
    ks: tuple[int, ...] = HITS_KS,
    aggregation: Aggregation = "pooled",
) -> Metrics:
    """Aggregate per-query outcomes into MRR and Hits@k.

    "pooled" averages over all directed queries; "direction-mean" averages
    the tail-prediction mean and the head-prediction mean (the two agree
    when both directions have equal query counts).
    """
    results = list(results)
    if not results:
        return Metrics(mrr=0.0, hits={k: 0.0 for k in ks}, query_count=0)

    def mean_metrics(rows: list[QueryResult]) -> tuple[float, dict[int, float]]:
        n = len(rows)
        mrr = sum(r.outcome.reciprocal_rank for r in rows) / n
        hits = {k: sum(1 for r in rows if r.outcome.hit(k)) / n for k in ks}
        return mrr, hits

    if aggregation == "pooled":
        mrr, hits = mean_metrics(results)
        return Metrics(mrr=mrr, hits=hits, query_count=len(results))

    by_direction: dict[str, list[QueryResult]] = {}
    for row in results:
        by_direction.setdefault(row.direction, []).append(row)
    parts = [mean_metrics(rows) for rows in by_direction.values()]
    mrr = sum(p[0] for p in parts) / len(parts)
    hits = {k: sum(p[1][k] for p in parts) / len(parts) for k in ks}
    return Metrics(mrr=mrr, hits=hits, query_count=len(results))


@dataclass
class EvalReport:
    metrics: Metrics
    results: list[QueryResult]
    split: str
    aggregation: Aggregation


def _query_direction(kg: KnowledgeGraph, query: Query) -> str:
    return "head" if kg.is_reciprocal(query.relation) else "tail"


def evaluate(
    kg: KnowledgeGraph,
    model: SequenceModel,
    selector_config: SelectorConfig,
    split: str = "test",
    sample_n: int = 500,
    max_new_tokens: int = 64,
    use_descriptions: bool = False,
    budget: int = DEFAULT_BUDGET,
    separator: str = DEFAULT_SEPARATOR,
    counter: TokenCounter = whitespace_token_counter,
    length_normalize: bool = False,
    aggregation: Aggregation = "pooled",
    workers: int = 1,
    log_path: str | Path | None = None,
    resume: bool = False,
) -> EvalReport:
    """Evaluate every directed query of a split (tail and head prediction).

    Each query samples with its own seed-derived stream, so results do not
    depend on worker count or completion order. With ``log_path`` set,
    completed queries are appended as line-delimited JSON immediately; a
    run aborted by a backend error can be resumed (``resume=True``) and
    skips the persisted queries, converging on identical final metrics.
    On success the log is rewritten in query order.
    """
    queries = directed_queries(kg, split)
    done: dict[str, QueryResult] = {}
    path = Path(log_path) if log_path is not None else None
    if path is not None and resume and path.exists():
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                result = QueryResult.from_record(json.loads(line))
                done[result.query_id] = result
        logger.info("resuming: %d of %d queries already evaluated", len(done), len(queries))

    log_handle = path.open("a", encoding="utf-8") if path is not None else None

    def run_query(index: int, query: Query) -> QueryResult:
        query_id = f"{split}/{index}"
        rng, model_seed = query_rng(selector_config.rng_seed, query)
        bundle = build_context(kg, query, selector_config, rng)
        rendered = verbalize(
            query, bundle, kg,
            use_descriptions=use_descriptions, budget=budget,
            separator=separator, counter=counter,
        )
        candidate_set = generate_candidates(
            model, rendered.text, kg,
            n=sample_n, max_new_tokens=max_new_tokens,
            seed=model_seed, length_normalize=length_normalize,
        )
        outcome = filtered_rank(
            candidate_set.entries, query.gold,
            filter_set(kg, query.source, query.relation),
            query_id=query_id,
        )
        return QueryResult(
            index=index,
            query_id=query_id,
            source=kg.entity_ids[query.source],
            relation=kg.relation_ids[kg.base_relation(query.relation)],
            direction=_query_direction(kg, query),
            gold=kg.entity_ids[query.gold],
            outcome=outcome,
            candidates=sorted(
                ((kg.entity_ids[e], lp) for e, lp in candidate_set.entries.items()),
                key=lambda pair: (-pair[1], pair[0]),
            ),
        )

    results: list[QueryResult] = list(done.values())
    pending = [(i, q) for i, q in enumerate(queries) if f"{split}/{i}" not in done]

    try:
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            for result in pool.map(lambda item: run_query(*item), pending):
                results.append(result)
                if log_handle is not None:
                    log_handle.write(json.dumps(result.as_record()) + "\n")
                    log_handle.flush()
    except BackendError:
        logger.error(
            "backend failure after %d/%d queries%s",
            len(results), len(queries),
            f"; resumable via {path}" if path is not None else "",
        )
        raise
    finally:
        if log_handle is not None:
            log_handle.close()

    results.sort(key=lambda r: r.index)
    if path is not None:
        with path.open("w", encoding="utf-8") as fh:
            for result in results:
                fh.write(json.dumps(result.as_record()) + "\n")

    metrics = metrics_from_outcomes(results, aggregation=aggregation)
    return EvalReport(metrics=metrics, results=results, split=split, aggregation=aggregation)
