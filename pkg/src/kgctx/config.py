"""Run configuration: everything that affects results lives in one
serializable document (YAML or JSON), so any output can be reproduced from
the config written alongside it. The schema is documented in the README.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .selector import SelectorConfig
from .store import DEFAULT_RECIPROCAL_PREFIX


class DatasetPaths(BaseModel):
    model_config = ConfigDict(extra="forbid")

    train: str
    valid: str
    test: str
    entity_mentions: str
    relation_mentions: str
    descriptions: str | None = None
    snapshot: str | None = None
    reciprocal_prefix: str = DEFAULT_RECIPROCAL_PREFIX


class VerbalizerOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    budget: int = Field(default=512, ge=1)
    use_descriptions: bool = False
    separator: str = Field(default="<SEP>", min_length=1)


class BackendConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["neighbor-copy", "uniform", "remote"] = "neighbor-copy"
    url: str | None = None
    timeout: float = Field(default=30.0, gt=0)
    max_batch: int = Field(default=256, ge=1)
    length_normalize: bool = False

    @model_validator(mode="after")
    def _remote_needs_url(self):
        if self.kind == "remote" and not self.url:
            raise ValueError("backend.kind 'remote' requires backend.url")
        return self


class RunConfig(BaseModel):
    """Complete description of one pipeline run."""

    model_config = ConfigDict(extra="forbid")

    dataset: DatasetPaths
    graph_name: str = "default"
    selector: SelectorConfig = SelectorConfig()
    verbalizer: VerbalizerOptions = VerbalizerOptions()
    backend: BackendConfig = BackendConfig()
    sample_n: int = Field(default=500, ge=1)
    max_new_tokens: int = Field(default=64, ge=1)
    eval_split: Literal["train", "valid", "test"] = "test"
    aggregation: Literal["pooled", "direction-mean"] = "pooled"
    workers: int = Field(default=0, ge=0)  # 0 = available cores
    output_dir: str = "runs"


def load_run_config(path: str | Path) -> RunConfig:
    """Parse a YAML (or JSON) config file into a validated RunConfig."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}")


def dump_run_config(config: RunConfig, path: str | Path) -> None:
    """Write the effective config next to a run's outputs (provenance)."""
    payload = config.model_dump(mode="json")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(yaml.safe_dump(payload, sort_keys=True), encoding="utf-8")
