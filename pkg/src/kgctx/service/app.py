"""HTTP service exposing the pipeline over JSON.

One process holds any number of ingested graphs in memory (they are
immutable, so concurrent readers are safe) and runs context sampling,
corpus emission and evaluation against them. Errors always come back as
``{"error": {"kind", "message"}}`` with kind config/data/backend so thin
clients can map them to exit codes without parsing messages.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..backends import MockNeighborCopyModel, MockUniformModel, RemoteModel
from ..config import BackendConfig, DatasetPaths
from ..errors import (
    BackendError,
    ConfigError,
    DataError,
    KgctxError,
    UnclassifiableRelationError,
)
from ..evaluate import evaluate
from ..selector import build_context, classify_cardinality, query_rng
from ..store import (
    KnowledgeGraph,
    Query,
    directed_queries,
    ingest,
    load_snapshot,
    normalize_key,
    save_snapshot,
)
from ..verbalize import audit_training_record, render_training_pair, verbalize
from . import schemas

logger = logging.getLogger(__name__)


class GraphNotFoundError(DataError):
    """Named graph is not registered with this service instance."""


def _error_response(status: int, kind: str, message: str) -> JSONResponse:
    body = schemas.ErrorResponse(error=schemas.ErrorBody(kind=kind, message=message))
    return JSONResponse(status_code=status, content=body.model_dump())


def _stats_response(name: str, kg: KnowledgeGraph) -> schemas.GraphStatsResponse:
    return schemas.GraphStatsResponse(name=name, **kg.stats.as_dict())


def _load_graph(dataset: DatasetPaths) -> KnowledgeGraph:
    try:
        if dataset.snapshot and Path(dataset.snapshot).exists():
            return load_snapshot(dataset.snapshot)
        return ingest(
            dataset.train,
            dataset.valid,
            dataset.test,
            dataset.entity_mentions,
            dataset.relation_mentions,
            dataset.descriptions,
            reciprocal_prefix=dataset.reciprocal_prefix,
        )
    except OSError as exc:
        raise DataError(f"cannot read dataset file: {exc}")


def _build_model(config: BackendConfig, kg: KnowledgeGraph, separator: str, seed: int):
    if config.kind == "neighbor-copy":
        return MockNeighborCopyModel(kg, separator=separator, seed=seed)
    if config.kind == "uniform":
        return MockUniformModel(kg, seed=seed)
    return RemoteModel(config.url, timeout=config.timeout, max_batch=config.max_batch)


def _resolve_entity(kg: KnowledgeGraph, text: str) -> int:
    entity = kg.entity_index.get(text)
    if entity is None:
        entity = kg.entity_for_text(text)
    if entity is None:
        raise DataError(f"unknown entity {text!r} (tried raw id and mention text)")
    return entity


def _resolve_relation(kg: KnowledgeGraph, text: str) -> int:
    relation = kg.relation_index.get(text)
    if relation is not None:
        return relation
    wanted = normalize_key(text)
    for rid, mention in enumerate(kg.mentions.relation_mentions):
        if normalize_key(mention) == wanted:
            return rid
    raise DataError(f"unknown relation {text!r} (tried raw id and mention text)")


def create_app() -> FastAPI:
    app = FastAPI(title="kgctx", version=__version__)
    graphs: dict[str, KnowledgeGraph] = {}
    app.state.graphs = graphs

    @app.exception_handler(KgctxError)
    async def handle_kgctx_error(request: Request, exc: KgctxError):
        if isinstance(exc, ConfigError):
            return _error_response(400, "config", str(exc))
        if isinstance(exc, GraphNotFoundError):
            return _error_response(404, "data", str(exc))
        if isinstance(exc, DataError):
            return _error_response(422, "data", str(exc))
        if isinstance(exc, BackendError):
            return _error_response(502, "backend", str(exc))
        return _error_response(500, "internal", str(exc))

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request, exc: RequestValidationError):
        return _error_response(400, "config", str(exc))

    def get_graph(name: str) -> KnowledgeGraph:
        if name not in graphs:
            raise GraphNotFoundError(f"graph {name!r} is not loaded; create it first")
        return graphs[name]

    @app.get("/v1/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(
            status="ok", service="kgctx", version=__version__, graphs=sorted(graphs)
        )

    @app.post("/v1/graphs", response_model=schemas.GraphStatsResponse)
    def create_graph(body: schemas.GraphCreateRequest):
        # re-creating an existing name replaces it: the operation is idempotent
        graphs[body.name] = _load_graph(body.dataset)
        return _stats_response(body.name, graphs[body.name])

    @app.get("/v1/graphs", response_model=schemas.GraphListResponse)
    def list_graphs():
        return schemas.GraphListResponse(
            graphs=[_stats_response(name, graphs[name]) for name in sorted(graphs)]
        )

    @app.get("/v1/graphs/{name}/stats", response_model=schemas.GraphStatsResponse)
    def graph_stats(name: str):
        return _stats_response(name, get_graph(name))

    @app.post("/v1/graphs/{name}/snapshot", response_model=schemas.SnapshotResponse)
    def write_snapshot(name: str, body: schemas.SnapshotRequest):
        kg = get_graph(name)
        path = Path(body.path)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_snapshot(kg, path)
        return schemas.SnapshotResponse(path=str(path), size_bytes=path.stat().st_size)

    @app.post("/v1/graphs/{name}/explain", response_model=schemas.ExplainResponse)
    def explain(name: str, body: schemas.ExplainRequest):
        kg = get_graph(name)
        source = _resolve_entity(kg, body.source)
        relation = _resolve_relation(kg, body.relation)
        if body.direction == "head":
            relation = kg.reciprocal(relation)
        gold = _resolve_entity(kg, body.gold) if body.gold is not None else None
        query = Query(source=source, relation=relation, gold=gold)

        rng, model_seed = query_rng(body.selector.rng_seed, query)
        bundle = build_context(kg, query, body.selector, rng)
        rendered = verbalize(
            query, bundle, kg,
            use_descriptions=body.verbalizer.use_descriptions,
            budget=body.verbalizer.budget,
            separator=body.verbalizer.separator,
        )
        try:
            cardinality = classify_cardinality(
                kg, relation, body.selector.cardinality_threshold
            ).value
        except UnclassifiableRelationError:
            cardinality = "unclassifiable"
        return schemas.ExplainResponse(
            source_id=kg.entity_ids[source],
            source=kg.entity_text(source),
            relation_id=kg.relation_ids[kg.base_relation(relation)],
            relation=kg.relation_text(relation),
            direction=body.direction,
            gold_id=kg.entity_ids[gold] if gold is not None else None,
            cardinality=cardinality,
            neighborhood=[
                schemas.NeighborhoodItemOut(
                    relation_id=kg.relation_ids[kg.base_relation(item.relation)],
                    relation=item.relation_text,
                    reciprocal=kg.is_reciprocal(item.relation),
                    entity_id=kg.entity_ids[item.entity],
                    entity=item.entity_text,
                )
                for item in bundle.neighborhood
            ],
            relation_context=[
                schemas.RelationContextItemOut(
                    head_id=kg.entity_ids[item.head],
                    head=item.head_text,
                    tail_id=kg.entity_ids[item.tail],
                    tail=item.tail_text,
                )
                for item in bundle.relation_context
            ],
            input_text=rendered.text,
            token_count=rendered.token_count,
            truncated=rendered.truncated,
            model_seed=model_seed,
        )

    @app.post("/v1/graphs/{name}/emit-train", response_model=schemas.EmitTrainResponse)
    def emit_train(name: str, body: schemas.EmitTrainRequest):
        kg = get_graph(name)
        path = Path(body.output_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        records = 0
        leaks = 0
        queries = directed_queries(kg, "train")
        if body.limit is not None:
            queries = queries[: body.limit]
        with path.open("w", encoding="utf-8") as fh:
            for query in queries:
                rng, _ = query_rng(body.selector.rng_seed, query)
                text, output = render_training_pair(
                    query, kg, body.selector, rng,
                    use_descriptions=body.verbalizer.use_descriptions,
                    budget=body.verbalizer.budget,
                    separator=body.verbalizer.separator,
                )
                if not audit_training_record(text, output, body.verbalizer.separator):
                    leaks += 1
                fh.write(json.dumps({"input": text, "output": output}, ensure_ascii=False) + "\n")
                records += 1
        if leaks:
            logger.warning("emit-train %s: %d leaked record(s)", path, leaks)
        return schemas.EmitTrainResponse(path=str(path), records=records, leak_violations=leaks)

    @app.post("/v1/graphs/{name}/evaluate", response_model=schemas.EvaluateResponse)
    def run_evaluation(name: str, body: schemas.EvaluateRequest):
        kg = get_graph(name)
        model = _build_model(
            body.backend, kg, body.verbalizer.separator, body.selector.rng_seed
        )
        try:
            report = evaluate(
                kg,
                model,
                body.selector,
                split=body.split,
                sample_n=body.sample_n,
                max_new_tokens=body.max_new_tokens,
                use_descriptions=body.verbalizer.use_descriptions,
                budget=body.verbalizer.budget,
                separator=body.verbalizer.separator,
                length_normalize=body.backend.length_normalize,
                aggregation=body.aggregation,
                workers=body.workers or os.cpu_count() or 1,
                log_path=body.log_path,
                resume=body.resume,
            )
        finally:
            if isinstance(model, RemoteModel):
                model.close()
        payload = report.metrics.as_dict()
        query_count = payload.pop("query_count")
        return schemas.EvaluateResponse(
            split=report.split,
            aggregation=report.aggregation,
            strategy=body.selector.strategy.value,
            backend_kind=body.backend.kind,
            metrics=payload,
            query_count=query_count,
            log_path=body.log_path,
        )

    @app.post("/v1/backend/check", response_model=schemas.BackendCheckResponse)
    def backend_check(body: schemas.BackendCheckRequest):
        if body.backend.kind == "remote":
            model = RemoteModel(
                body.backend.url, timeout=body.backend.timeout, max_batch=body.backend.max_batch
            )
            try:
                detail = model.health()
            finally:
                model.close()
            return schemas.BackendCheckResponse(status="ok", kind="remote", detail=detail)
        detail: dict = {}
        if body.graph is not None:
            kg = get_graph(body.graph)
            detail = {"graph": body.graph, "entities": kg.num_entities}
        return schemas.BackendCheckResponse(status="ok", kind=body.backend.kind, detail=detail)

    return app
