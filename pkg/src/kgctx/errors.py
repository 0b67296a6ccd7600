"""Exception hierarchy shared across the package.

The three top-level branches map onto the CLI exit codes: configuration
problems (exit 2), dataset/graph problems (exit 3) and model-backend
problems (exit 4).
"""

from __future__ import annotations


class KgctxError(Exception):
    """Base class for all package errors."""


class ConfigError(KgctxError):
    """Invalid run configuration or options."""


class BudgetError(ConfigError):
    """Token budget too small to hold even the mandatory query segment."""


class DataError(KgctxError):
    """Problem with dataset files or graph contents."""


class TripleParseError(DataError):
    """Malformed line in a triple or mention file."""

    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class MissingMentionError(DataError):
    """Triples reference ids that have no mention text."""

    def __init__(self, entity_ids: list[str], relation_ids: list[str]):
        parts = []
        if entity_ids:
            parts.append(f"entities without mention: {', '.join(sorted(entity_ids))}")
        if relation_ids:
            parts.append(f"relations without mention: {', '.join(sorted(relation_ids))}")
        super().__init__("; ".join(parts))
        self.entity_ids = entity_ids
        self.relation_ids = relation_ids


class UnclassifiableRelationError(DataError):
    """Relation has no training triples, so cardinality is undefined."""


class SnapshotError(DataError):
    """Snapshot file is corrupt or has an unsupported version."""


class BackendError(KgctxError):
    """Base class for sequence-model backend failures."""


class BackendTimeoutError(BackendError):
    """Backend did not answer within the configured timeout."""


class BackendTransportError(BackendError):
    """Backend unreachable or the connection failed mid-request."""


class BackendHTTPError(BackendError):
    """Backend answered with a non-2xx status."""

    def __init__(self, status_code: int, message: str):
        super().__init__(f"backend returned HTTP {status_code}: {message}")
        self.status_code = status_code


class BackendProtocolError(BackendError):
    """Backend response violates the wire protocol schema or invariants."""
