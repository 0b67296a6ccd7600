"""Render a query and its sampled context into the model input sequence.

The template is fixed and bit-exact (documented in the README): segments
joined by a literal separator token, section labels on the first item of
each section only::

    query: <head> | <relation>
    description: <head description>          (optional)
    entity neighborhood: <rel> | <entity>    then bare "<rel> | <entity>" items
    relation context: <head> | <tail>        then bare "<head> | <tail>" items

Token budgets are enforced with an injected counter so the true subword
counter of a live backend can replace the default whitespace approximation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .errors import BudgetError, DataError
from .selector import ContextBundle, SelectorConfig, build_context, query_rng
from .store import KnowledgeGraph, Query, directed_queries

TokenCounter = Callable[[str], int]

DEFAULT_SEPARATOR = "<SEP>"
DEFAULT_BUDGET = 512

QUERY_LABEL = "query: "
DESCRIPTION_LABEL = "description: "
NEIGHBORHOOD_LABEL = "entity neighborhood: "
RELATION_CONTEXT_LABEL = "relation context: "


def whitespace_token_counter(text: str) -> int:
    """Default counter: whitespace-delimited pieces. An approximation of a
    subword tokenizer; monotone over prefixes, which truncation relies on."""
    return len(text.split())


@dataclass
class VerbalizedInput:
    text: str
    token_count: int
    truncated: bool
    kept_neighborhood: int
    kept_relation_context: int


def _assemble(
    query_segment: str,
    description: str | None,
    neighborhood: list[str],
    relation_context: list[str],
    separator: str,
) -> str:
    segments = [query_segment]
    if description is not None:
        segments.append(DESCRIPTION_LABEL + description)
    if neighborhood:
        segments.append(NEIGHBORHOOD_LABEL + neighborhood[0])
        segments.extend(neighborhood[1:])
    if relation_context:
        segments.append(RELATION_CONTEXT_LABEL + relation_context[0])
        segments.extend(relation_context[1:])
    return f" {separator} ".join(segments)


def verbalize(
    query: Query,
    bundle: ContextBundle,
    kg: KnowledgeGraph,
    use_descriptions: bool = False,
    budget: int = DEFAULT_BUDGET,
    separator: str = DEFAULT_SEPARATOR,
    counter: TokenCounter = whitespace_token_counter,
) -> VerbalizedInput:
    """Render the template, dropping whole context items to fit the budget.

    Items are dropped from the tail of the sequence, relation context
    before neighborhood; a description is word-truncated only after all
    context is gone; the query segment is never touched. Raises
    :class:`BudgetError` when even the bare query overflows.
    """
    if query.source >= kg.num_entities:
        raise DataError(f"query source entity {query.source} not in graph")
    query_segment = f"{QUERY_LABEL}{kg.entity_text(query.source)} | {kg.relation_text(query.relation)}"
    description = kg.description(query.source) if use_descriptions else None

    nbr_items = [f"{item.relation_text} | {item.entity_text}" for item in bundle.neighborhood]
    ctx_items = [f"{item.head_text} | {item.tail_text}" for item in bundle.relation_context]

    text = _assemble(query_segment, description, nbr_items, ctx_items, separator)
    count = counter(text)
    truncated = False
    while count > budget and ctx_items:
        ctx_items.pop()
        truncated = True
        text = _assemble(query_segment, description, nbr_items, ctx_items, separator)
        count = counter(text)
    while count > budget and nbr_items:
        nbr_items.pop()
        truncated = True
        text = _assemble(query_segment, description, nbr_items, ctx_items, separator)
        count = counter(text)
    if count > budget and description is not None:
        words = description.split()
        while count > budget and words:
            words.pop()
            truncated = True
            desc = " ".join(words) if words else None
            text = _assemble(query_segment, desc, nbr_items, ctx_items, separator)
            count = counter(text)
    if count > budget:
        raise BudgetError(
            f"token budget {budget} cannot hold the query segment ({count} tokens)"
        )
    return VerbalizedInput(
        text=text,
        token_count=count,
        truncated=truncated,
        kept_neighborhood=len(nbr_items),
        kept_relation_context=len(ctx_items),
    )


def render_training_pair(
    query: Query,
    kg: KnowledgeGraph,
    config: SelectorConfig,
    rng: np.random.Generator,
    use_descriptions: bool = False,
    budget: int = DEFAULT_BUDGET,
    separator: str = DEFAULT_SEPARATOR,
    counter: TokenCounter = whitespace_token_counter,
) -> tuple[str, str]:
    """One (input, output) training record for a directed query with known gold.

    The selector guarantees the gold completion never leaks into the
    sampled context.
    """
    if query.gold is None:
        raise DataError("training pair requires a query with a known gold entity")
    bundle = build_context(kg, query, config, rng)
    rendered = verbalize(
        query, bundle, kg,
        use_descriptions=use_descriptions, budget=budget, separator=separator, counter=counter,
    )
    return rendered.text, kg.entity_text(query.gold)


def audit_training_record(
    input_text: str, output_text: str, separator: str = DEFAULT_SEPARATOR
) -> bool:
    """True when the record is leak-free.

    A leak is the output mention appearing as the entity of a neighborhood
    item whose relation text equals the query's relation text; such an item
    would state the answer verbatim in the input.
    """
    segments = input_text.split(f" {separator} ")
    if not segments or not segments[0].startswith(QUERY_LABEL):
        return False
    query_relation = segments[0][len(QUERY_LABEL):].rsplit(" | ", 1)[-1]
    in_section = False
    for segment in segments[1:]:
        if segment.startswith(NEIGHBORHOOD_LABEL):
            in_section = True
            segment = segment[len(NEIGHBORHOOD_LABEL):]
        elif segment.startswith((DESCRIPTION_LABEL, RELATION_CONTEXT_LABEL, QUERY_LABEL)):
            in_section = False
        if not in_section or " | " not in segment:
            continue
        relation_text, entity_text = segment.rsplit(" | ", 1)
        if relation_text == query_relation and entity_text == output_text:
            return False
    return True


def training_pairs(
    kg: KnowledgeGraph,
    config: SelectorConfig,
    use_descriptions: bool = False,
    budget: int = DEFAULT_BUDGET,
    separator: str = DEFAULT_SEPARATOR,
    counter: TokenCounter = whitespace_token_counter,
) -> Iterator[tuple[str, str]]:
    """Yield both-direction training pairs for every train triple, in order."""
    for query in directed_queries(kg, "train"):
        rng, _ = query_rng(config.rng_seed, query)
        yield render_training_pair(
            query, kg, config, rng,
            use_descriptions=use_descriptions, budget=budget, separator=separator, counter=counter,
        )
