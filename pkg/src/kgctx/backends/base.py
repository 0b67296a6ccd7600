"""Sequence-model contract and candidate-set construction.

Anything that can sample output sequences with log-likelihoods, score given
outputs, and count tokens can drive the pipeline: in-process mocks and the
remote HTTP client are interchangeable behind :class:`SequenceModel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Protocol, Sequence, runtime_checkable

from ..store import KnowledgeGraph

DEFAULT_MAX_NEW_TOKENS = 64


class Sample(NamedTuple):
    text: str
    logprob: float


@runtime_checkable
class SequenceModel(Protocol):
    """Contract all backends implement.

    ``sample`` returns exactly ``n`` draws (duplicates allowed); ``score``
    is deterministic for fixed weights; all log-likelihoods are natural
    logs and never positive.
    """

    def sample(
        self, input_text: str, n: int, max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS,
        seed: int | None = None,
    ) -> list[Sample]: ...

    def score(self, input_text: str, outputs: Sequence[str]) -> list[float]: ...

    def tokenize(self, text: str) -> int: ...


@dataclass
class CandidateSet:
    """Deduplicated entity -> log-likelihood map built from decoder samples.

    ``discarded_count`` counts samples whose text matched no entity
    mention.
    """

    entries: dict[int, float] = field(default_factory=dict)
    discarded_count: int = 0


def generate_candidates(
    model: SequenceModel,
    input_text: str,
    kg: KnowledgeGraph,
    n: int = 500,
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS,
    seed: int | None = None,
    length_normalize: bool = False,
) -> CandidateSet:
    """Draw ``n`` samples and map them onto entities.

    Sampled text is matched against the alias table after case and
    whitespace normalization; unmatched samples are discarded. When one
    entity is sampled several times the maximum log-likelihood survives.
    ``length_normalize`` divides each score by the output's whitespace
    token count (off by default: raw sequence log-likelihood).

    Samples with a non-finite score are discarded like unmatched text, so
    ``len(entries) + discarded_count == n`` whenever no entity repeats.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    entries: dict[int, float] = {}
    discarded = 0
    for text, logprob in model.sample(input_text, n, max_new_tokens, seed=seed):
        entity = kg.entity_for_text(text)
        if entity is None:
            discarded += 1
            continue
        if length_normalize:
            logprob = logprob / max(1, len(text.split()))
        if not math.isfinite(logprob):
            discarded += 1
            continue
        prev = entries.get(entity)
        if prev is None or logprob > prev:
            entries[entity] = logprob
    return CandidateSet(entries=entries, discarded_count=discarded)
