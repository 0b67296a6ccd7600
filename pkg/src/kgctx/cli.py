"""Command-line client for the pipeline service.

Every command speaks the service's HTTP API. With ``--server URL`` the
requests go to a running instance; without it an in-process application
serves them, so single-machine use needs no separate daemon. Exit codes:
0 success, 2 configuration error, 3 data error, 4 backend error, 1 anything
else.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

from .config import RunConfig, dump_run_config, load_run_config
from .errors import ConfigError
from .selector import Strategy

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_BACKEND = 4

_KIND_EXIT_CODES = {"config": EXIT_CONFIG, "data": EXIT_DATA, "backend": EXIT_BACKEND}

ABLATIONS = {
    "no-relation-context": Strategy.NO_RELATION_CONTEXT,
    "random-sampling": Strategy.RANDOM,
}


class ServiceClient:
    """Minimal JSON client; in-process unless a server URL is given."""

    def __init__(self, server: str | None):
        if server:
            self._client = httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
        else:
            from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app())

    def call(self, method: str, path: str, payload: dict | None = None) -> dict:
        try:
            response = self._client.request(method, path, json=payload)
        except httpx.HTTPError as exc:
            _fail("backend", f"cannot reach service: {exc}")
        if response.status_code >= 300:
            try:
                error = response.json()["error"]
                _fail(error.get("kind", "internal"), error.get("message", response.text))
            except (ValueError, KeyError):
                _fail("internal", f"HTTP {response.status_code}: {response.text[:300]}")
        return response.json()

    def close(self) -> None:
        self._client.close()


def _fail(kind: str, message: str) -> None:
    click.echo(f"error ({kind}): {message}", err=True)
    sys.exit(_KIND_EXIT_CODES.get(kind, 1))


def _echo_json(payload: dict) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


def _load_config(path: str) -> RunConfig:
    try:
        return load_run_config(path)
    except ConfigError as exc:
        _fail("config", str(exc))


def _ensure_graph(client: ServiceClient, config: RunConfig) -> dict:
    return client.call(
        "POST",
        "/v1/graphs",
        {"name": config.graph_name, "dataset": config.dataset.model_dump(mode="json")},
    )


def _apply_ablation(config: RunConfig, ablation: str | None) -> RunConfig:
    if ablation is None:
        return config
    return config.model_copy(
        update={"selector": config.selector.model_copy(update={"strategy": ABLATIONS[ablation]})},
        deep=True,
    )


def _write_effective_config(config: RunConfig, out_dir: Path, stem: str) -> Path:
    path = out_dir / f"{stem}.config.yaml"
    dump_run_config(config, path)
    return path


@click.group()
@click.option("--server", envvar="KGCTX_SERVER", default=None, metavar="URL",
              help="Service URL; omit to run the service in-process.")
@click.pass_context
def main(ctx, server):
    """Knowledge-graph completion pipeline."""
    ctx.obj = {"server": server}


def _client(ctx) -> ServiceClient:
    return ServiceClient(ctx.obj["server"])


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--snapshot-out", default=None, type=click.Path(),
              help="Also write a binary snapshot for fast reloads.")
@click.pass_context
def ingest(ctx, config_path, snapshot_out):
    """Load the dataset into the service and print ingestion statistics."""
    config = _load_config(config_path)
    client = _client(ctx)
    stats = _ensure_graph(client, config)
    if snapshot_out:
        result = client.call(
            "POST", f"/v1/graphs/{config.graph_name}/snapshot", {"path": snapshot_out}
        )
        stats["snapshot"] = result
        _write_effective_config(config, Path(snapshot_out).parent, Path(snapshot_out).name)
    _echo_json(stats)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.pass_context
def stats(ctx, config_path):
    """Print entity/relation/triple counts for the configured dataset."""
    config = _load_config(config_path)
    client = _client(ctx)
    _ensure_graph(client, config)
    _echo_json(client.call("GET", f"/v1/graphs/{config.graph_name}/stats"))


@main.command("emit-train")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Destination JSONL file of {input, output} records.")
@click.option("--limit", default=None, type=int, help="Emit only the first N records.")
@click.pass_context
def emit_train(ctx, config_path, out_path, limit):
    """Write the training corpus (both query directions per train triple)."""
    config = _load_config(config_path)
    client = _client(ctx)
    _ensure_graph(client, config)
    payload = {
        "output_path": out_path,
        "selector": config.selector.model_dump(mode="json"),
        "verbalizer": config.verbalizer.model_dump(mode="json"),
    }
    if limit is not None:
        payload["limit"] = limit
    result = client.call("POST", f"/v1/graphs/{config.graph_name}/emit-train", payload)
    _write_effective_config(config, Path(out_path).parent, Path(out_path).name)
    _echo_json(result)
    if result["leak_violations"]:
        _fail("data", f"{result['leak_violations']} training record(s) leak their answer")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--source", required=True, help="Entity raw id or mention text.")
@click.option("--relation", required=True, help="Relation raw id or mention text.")
@click.option("--direction", type=click.Choice(["tail", "head"]), default="tail")
@click.option("--gold", default=None, help="Known answer to exclude from context.")
@click.pass_context
def explain(ctx, config_path, source, relation, direction, gold):
    """Show the sampled context and rendered input for one query."""
    config = _load_config(config_path)
    client = _client(ctx)
    _ensure_graph(client, config)
    result = client.call(
        "POST",
        f"/v1/graphs/{config.graph_name}/explain",
        {
            "source": source,
            "relation": relation,
            "direction": direction,
            "gold": gold,
            "selector": config.selector.model_dump(mode="json"),
            "verbalizer": config.verbalizer.model_dump(mode="json"),
        },
    )
    click.echo(f"query: {result['source']} | {result['relation']}  [{result['direction']}]")
    click.echo(f"cardinality: {result['cardinality']}")
    click.echo(f"neighborhood ({len(result['neighborhood'])}):")
    for item in result["neighborhood"]:
        marker = "~" if item["reciprocal"] else " "
        click.echo(f" {marker} {item['relation']} | {item['entity']}  [{item['relation_id']} {item['entity_id']}]")
    click.echo(f"relation context ({len(result['relation_context'])}):")
    for item in result["relation_context"]:
        click.echo(f"   {item['head']} | {item['tail']}  [{item['head_id']} {item['tail_id']}]")
    click.echo(f"input ({result['token_count']} tokens, truncated={result['truncated']}):")
    click.echo(result["input_text"])


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--ablation", type=click.Choice(sorted(ABLATIONS)), default=None,
              help="Override the sampling strategy for ablation runs.")
@click.option("--out-dir", default=None, type=click.Path(),
              help="Directory for metrics, per-query log and effective config.")
@click.option("--resume", is_flag=True, help="Reuse per-query results from an aborted run.")
@click.pass_context
def evaluate(ctx, config_path, ablation, out_dir, resume):
    """Rank every directed query of the eval split and report MRR/Hits@k."""
    config = _apply_ablation(_load_config(config_path), ablation)
    run_dir = Path(out_dir) if out_dir else Path(config.output_dir)
    run_name = f"eval-{config.eval_split}-{config.selector.strategy.value}"
    run_dir.mkdir(parents=True, exist_ok=True)
    log_path = run_dir / f"{run_name}.queries.jsonl"

    client = _client(ctx)
    _ensure_graph(client, config)
    result = client.call(
        "POST",
        f"/v1/graphs/{config.graph_name}/evaluate",
        {
            "backend": config.backend.model_dump(mode="json"),
            "selector": config.selector.model_dump(mode="json"),
            "verbalizer": config.verbalizer.model_dump(mode="json"),
            "split": config.eval_split,
            "sample_n": config.sample_n,
            "max_new_tokens": config.max_new_tokens,
            "aggregation": config.aggregation,
            "workers": config.workers,
            "log_path": str(log_path),
            "resume": resume,
        },
    )
    _write_effective_config(config, run_dir, run_name)
    report_path = run_dir / f"{run_name}.metrics.json"
    report_path.write_text(json.dumps(result, indent=2, sort_keys=True), encoding="utf-8")

    click.echo(f"split={result['split']} strategy={result['strategy']} "
               f"backend={result['backend_kind']} aggregation={result['aggregation']}")
    for key, value in sorted(result["metrics"].items()):
        click.echo(f"{key}: {value:.6f}")
    click.echo(f"queries: {result['query_count']}")
    click.echo(f"per-query log: {result['log_path']}")
    click.echo(f"metrics written to {report_path}")


@main.command("serve-check")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.pass_context
def serve_check(ctx, config_path):
    """Ping the configured model backend and report its health."""
    config = _load_config(config_path)
    client = _client(ctx)
    payload = {"backend": config.backend.model_dump(mode="json")}
    if config.backend.kind != "remote":
        _ensure_graph(client, config)
        payload["graph"] = config.graph_name
    _echo_json(client.call("POST", "/v1/backend/check", payload))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8400, show_default=True, type=int)
def serve(host, port):
    """Run the pipeline service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
