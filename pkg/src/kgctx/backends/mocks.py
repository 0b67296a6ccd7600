"""In-process mock backends: pipeline tests without neural weights.

Both mocks are deterministic functions of (input text, seed), so full
evaluation runs reproduce exactly under any worker scheduling.
"""

from __future__ import annotations

import math
import zlib
from typing import Sequence

import numpy as np

from ..store import KnowledgeGraph
from ..verbalize import (
    DEFAULT_SEPARATOR,
    DESCRIPTION_LABEL,
    NEIGHBORHOOD_LABEL,
    QUERY_LABEL,
    RELATION_CONTEXT_LABEL,
    whitespace_token_counter,
)
from .base import DEFAULT_MAX_NEW_TOKENS, Sample

_SECTION_LABELS = (QUERY_LABEL, DESCRIPTION_LABEL, NEIGHBORHOOD_LABEL, RELATION_CONTEXT_LABEL)


def _derived_rng(base_seed: int, input_text: str, seed: int | None) -> np.random.Generator:
    entropy = [base_seed, zlib.crc32(input_text.encode("utf-8")), 0 if seed is None else seed + 1]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def relation_context_mentions(input_text: str, separator: str = DEFAULT_SEPARATOR) -> list[str]:
    """Extract the mention texts occurring in the relation-context section.

    Splits the rendered template back into segments; both sides of every
    ``head | tail`` item are returned, in order, one occurrence per slot.
    """
    segments = input_text.split(f" {separator} ")
    mentions: list[str] = []
    in_section = False
    for segment in segments:
        if segment.startswith(RELATION_CONTEXT_LABEL):
            in_section = True
            segment = segment[len(RELATION_CONTEXT_LABEL):]
        elif any(segment.startswith(label) for label in _SECTION_LABELS):
            in_section = False
        if in_section:
            mentions.extend(part for part in segment.split(" | ") if part)
    return mentions


class MockNeighborCopyModel:
    """Emits entities seen in the input's relation-context section,
    weighted by how often their mention occurs there; falls back to a
    uniform draw over all entity mentions when the section is empty.
    """

    def __init__(self, kg: KnowledgeGraph, separator: str = DEFAULT_SEPARATOR, seed: int = 0):
        self._kg = kg
        self._separator = separator
        self._seed = seed

    def _distribution(self, input_text: str) -> tuple[list[str], np.ndarray]:
        counts: dict[int, int] = {}
        for mention in relation_context_mentions(input_text, self._separator):
            entity = self._kg.entity_for_text(mention)
            if entity is not None:
                counts[entity] = counts.get(entity, 0) + 1
        if not counts:
            texts = [self._kg.entity_text(e) for e in range(self._kg.num_entities)]
            return texts, np.full(len(texts), 1.0 / len(texts))
        entities = sorted(counts)
        total = sum(counts[e] for e in entities)
        probs = np.array([counts[e] / total for e in entities])
        return [self._kg.entity_text(e) for e in entities], probs

    def sample(
        self, input_text: str, n: int, max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS,
        seed: int | None = None,
    ) -> list[Sample]:
        texts, probs = self._distribution(input_text)
        rng = _derived_rng(self._seed, input_text, seed)
        picks = rng.choice(len(texts), size=n, p=probs)
        return [Sample(texts[i], math.log(probs[i])) for i in picks]

    def score(self, input_text: str, outputs: Sequence[str]) -> list[float]:
        texts, probs = self._distribution(input_text)
        lookup = {t: math.log(p) for t, p in zip(texts, probs)}
        return [lookup.get(text, float("-inf")) for text in outputs]

    def tokenize(self, text: str) -> int:
        return whitespace_token_counter(text)


class MockUniformModel:
    """Samples uniformly over all canonical entity mentions. Every sample
    carries the same log-likelihood, so downstream ranking sees full ties.
    """

    def __init__(self, kg: KnowledgeGraph, seed: int = 0):
        self._kg = kg
        self._seed = seed
        self._logprob = -math.log(max(1, kg.num_entities))

    def sample(
        self, input_text: str, n: int, max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS,
        seed: int | None = None,
    ) -> list[Sample]:
        rng = _derived_rng(self._seed, input_text, seed)
        picks = rng.integers(self._kg.num_entities, size=n)
        return [Sample(self._kg.entity_text(int(e)), self._logprob) for e in picks]

    def score(self, input_text: str, outputs: Sequence[str]) -> list[float]:
        return [
            self._logprob if self._kg.entity_for_text(text) is not None else float("-inf")
            for text in outputs
        ]

    def tokenize(self, text: str) -> int:
        return whitespace_token_counter(text)
