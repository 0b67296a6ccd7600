"""Request/response bodies for the pipeline service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from ..config import BackendConfig, DatasetPaths, VerbalizerOptions
from ..selector import SelectorConfig


class HealthResponse(BaseModel):
    status: str
    service: str
    version: str
    graphs: list[str]


class GraphCreateRequest(BaseModel):
    name: str = Field(default="default", min_length=1, max_length=100)
    dataset: DatasetPaths


class GraphStatsResponse(BaseModel):
    name: str
    entities: int
    relations: int
    train: int
    valid: int
    test: int
    duplicates_dropped: dict[str, int]
    cross_split_overlap: dict[str, int]


class GraphListResponse(BaseModel):
    graphs: list[GraphStatsResponse]


class SnapshotRequest(BaseModel):
    path: str


class SnapshotResponse(BaseModel):
    path: str
    size_bytes: int


class NeighborhoodItemOut(BaseModel):
    relation_id: str
    relation: str
    reciprocal: bool
    entity_id: str
    entity: str


class RelationContextItemOut(BaseModel):
    head_id: str
    head: str
    tail_id: str
    tail: str


class ExplainRequest(BaseModel):
    """Context dump for one query; ids or mention texts both resolve."""

    source: str
    relation: str
    direction: Literal["tail", "head"] = "tail"
    gold: str | None = None
    selector: SelectorConfig = SelectorConfig()
    verbalizer: VerbalizerOptions = VerbalizerOptions()


class ExplainResponse(BaseModel):
    source_id: str
    source: str
    relation_id: str
    relation: str
    direction: str
    gold_id: str | None
    cardinality: str
    neighborhood: list[NeighborhoodItemOut]
    relation_context: list[RelationContextItemOut]
    input_text: str
    token_count: int
    truncated: bool
    model_seed: int


class EmitTrainRequest(BaseModel):
    output_path: str
    selector: SelectorConfig = SelectorConfig()
    verbalizer: VerbalizerOptions = VerbalizerOptions()
    limit: int | None = Field(default=None, ge=1)


class EmitTrainResponse(BaseModel):
    path: str
    records: int
    leak_violations: int


class EvaluateRequest(BaseModel):
    backend: BackendConfig = BackendConfig()
    selector: SelectorConfig = SelectorConfig()
    verbalizer: VerbalizerOptions = VerbalizerOptions()
    split: Literal["train", "valid", "test"] = "test"
    sample_n: int = Field(default=500, ge=1)
    max_new_tokens: int = Field(default=64, ge=1)
    aggregation: Literal["pooled", "direction-mean"] = "pooled"
    workers: int = Field(default=0, ge=0)
    log_path: str | None = None
    resume: bool = False


class EvaluateResponse(BaseModel):
    split: str
    aggregation: str
    strategy: str
    backend_kind: str
    metrics: dict[str, float]
    query_count: int
    log_path: str | None


class BackendCheckRequest(BaseModel):
    backend: BackendConfig = BackendConfig()
    graph: str | None = None


class BackendCheckResponse(BaseModel):
    status: str
    kind: str
    detail: dict


class ErrorBody(BaseModel):
    kind: Literal["config", "data", "backend", "internal"]
    message: str


class ErrorResponse(BaseModel):
    error: ErrorBody
