"""HTTP client for a model server speaking the wire protocol.

Endpoints (JSON over HTTP, UTF-8; all log-likelihoods natural logs):

    POST /v1/sample    {"input", "n", "max_new_tokens", "seed"?}
                       -> {"samples": [{"text", "logprob"}]}
    POST /v1/score     {"input", "outputs": [str]} -> {"logprobs": [float]}
    POST /v1/tokenize  {"text"} -> {"count": int}
    GET  /v1/health    -> {"status": "ok", "model": str}

Non-2xx responses carry {"error": str}. Transport failures, HTTP failures
and schema violations are surfaced as distinct exception types.
"""

from __future__ import annotations

import math
import time
from typing import Sequence

import httpx

from ..errors import (
    BackendHTTPError,
    BackendProtocolError,
    BackendTimeoutError,
    BackendTransportError,
)
from .base import DEFAULT_MAX_NEW_TOKENS, Sample

_RETRY_ATTEMPTS = 3


class RemoteModel:
    """Sequence-model client over the wire protocol.

    Requests larger than ``max_batch`` are split into several calls. All
    endpoints are idempotent for fixed weights, so transport failures and
    5xx responses are retried with exponential backoff (3 attempts).
    """

    def __init__(
        self,
        endpoint_url: str,
        timeout: float = 30.0,
        max_batch: int = 256,
        transport: httpx.BaseTransport | None = None,
        retry_backoff: float = 0.5,
    ):
        self.endpoint_url = endpoint_url.rstrip("/")
        self.max_batch = max_batch
        self._retry_backoff = retry_backoff
        self._client = httpx.Client(
            base_url=self.endpoint_url, timeout=timeout, transport=transport
        )

    def close(self) -> None:
        self._client.close()

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        last_error: Exception | None = None
        for attempt in range(_RETRY_ATTEMPTS):
            if attempt:
                time.sleep(self._retry_backoff * 2 ** (attempt - 1))
            try:
                response = self._client.request(method, path, json=payload)
            except httpx.TimeoutException as exc:
                last_error = BackendTimeoutError(f"{method} {path}: {exc}")
                continue
            except httpx.HTTPError as exc:
                last_error = BackendTransportError(f"{method} {path}: {exc}")
                continue
            if response.status_code >= 500:
                last_error = _http_error(response)
                continue
            if response.status_code >= 300:
                raise _http_error(response)
            try:
                body = response.json()
            except ValueError as exc:
                raise BackendProtocolError(f"{method} {path}: response is not JSON: {exc}")
            if not isinstance(body, dict):
                raise BackendProtocolError(f"{method} {path}: expected a JSON object")
            return body
        assert last_error is not None
        raise last_error

    def sample(
        self, input_text: str, n: int, max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS,
        seed: int | None = None,
    ) -> list[Sample]:
        samples: list[Sample] = []
        chunk_index = 0
        remaining = n
        while remaining > 0:
            chunk = min(remaining, self.max_batch)
            payload = {"input": input_text, "n": chunk, "max_new_tokens": max_new_tokens}
            if seed is not None:
                payload["seed"] = seed + chunk_index
            body = self._request("POST", "/v1/sample", payload)
            rows = body.get("samples")
            if not isinstance(rows, list):
                raise BackendProtocolError("/v1/sample: missing 'samples' list")
            if len(rows) != chunk:
                raise BackendProtocolError(
                    f"/v1/sample: asked for {chunk} samples, got {len(rows)}"
                )
            for row in rows:
                samples.append(Sample(_parse_text(row), _parse_logprob(row.get("logprob"))))
            remaining -= chunk
            chunk_index += 1
        return samples

    def score(self, input_text: str, outputs: Sequence[str]) -> list[float]:
        scores: list[float] = []
        outputs = list(outputs)
        for start in range(0, len(outputs), self.max_batch):
            batch = outputs[start : start + self.max_batch]
            body = self._request("POST", "/v1/score", {"input": input_text, "outputs": batch})
            logprobs = body.get("logprobs")
            if not isinstance(logprobs, list) or len(logprobs) != len(batch):
                raise BackendProtocolError("/v1/score: 'logprobs' missing or wrong length")
            scores.extend(_parse_logprob(v) for v in logprobs)
        return scores

    def tokenize(self, text: str) -> int:
        body = self._request("POST", "/v1/tokenize", {"text": text})
        count = body.get("count")
        if not isinstance(count, int) or count < 0:
            raise BackendProtocolError("/v1/tokenize: 'count' missing or negative")
        return count

    def health(self) -> dict:
        return self._request("GET", "/v1/health")


def _http_error(response: httpx.Response) -> BackendHTTPError:
    try:
        message = response.json().get("error", response.text)
    except ValueError:
        message = response.text
    return BackendHTTPError(response.status_code, str(message)[:500])


def _parse_text(row: object) -> str:
    if not isinstance(row, dict) or not isinstance(row.get("text"), str):
        raise BackendProtocolError("/v1/sample: sample rows need a string 'text'")
    return row["text"]


def _parse_logprob(value: object) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise BackendProtocolError(f"logprob must be a number, got {value!r}")
    logprob = float(value)
    if math.isnan(logprob) or logprob > 0:
        raise BackendProtocolError(f"logprob must be <= 0 and not NaN, got {logprob}")
    return logprob
