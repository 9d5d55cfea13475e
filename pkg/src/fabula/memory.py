"""Memory accrual, reflection and context retrieval.

Every event an agent experiences lands in its stream through
:func:`append_memory`, rated for poignancy on arrival. The accumulated
since-last-reflection sum gates :func:`reflect`, a three-step chain
(salient topics, then questions, then answers) whose answers re-enter the
stream as higher-level ``reflection`` records.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from datetime import datetime

from fabula.model import MemoryRecord, MemoryStream, format_sim_date
from fabula.narrator import (
    Narrator,
    NarratorError,
    rate_poignancy,
)
from fabula.narrator import prompts

logger = logging.getLogger(__name__)

# applied when the rater keeps failing; low-moderate so a broken backend
# cannot trigger reflection storms
FALLBACK_POIGNANCY = 3

RETRIEVAL_RECENCY_WEIGHT = 0.5
RETRIEVAL_POIGNANCY_WEIGHT = 0.3
RETRIEVAL_KEYWORD_WEIGHT = 0.2
RETRIEVAL_HALF_LIFE_TICKS = 24.0
TICK_HOURS = 2.0

_WORD = re.compile(r"\w+")

GENERIC_SYSTEM_CONTEXT = (
    "You are the narrator of a sandbox world, reflecting on an agent's accumulated memories."
)


@dataclass
class ReflectionBatch:
    """Artifacts of one reflection: the records it drew on and the chain's
    three outputs."""

    source_record_ids: list[int]
    salient_topics: list[str]
    questions: list[str]
    answers: list[str]


def append_memory(
    stream: MemoryStream,
    sim_time: datetime,
    kind: str,
    text: str,
    rater: Narrator,
) -> MemoryRecord:
    """Append one experience, rated on the poignancy scale by ``rater``.

    All kinds are rated uniformly, reflections and narrative memories
    included. If the rater fails even after its retry, the record is still
    appended with ``FALLBACK_POIGNANCY`` and a warning is logged.
    """
    if not text:
        raise ValueError("memory text must be non-empty")
    try:
        poignancy = rate_poignancy(rater, text)
    except NarratorError as exc:
        logger.warning("poignancy rating failed (%s); falling back to %d", exc, FALLBACK_POIGNANCY)
        poignancy = FALLBACK_POIGNANCY
    record = MemoryRecord(
        id=stream.next_id(),
        sim_time=sim_time,
        kind=kind,
        text=text,
        poignancy=poignancy,
    )
    stream.records.append(record)
    return record


def cumulative_poignancy(stream: MemoryStream) -> int:
    """Sum of ratings accrued since the last reflection."""
    return sum(r.poignancy for r in stream.since_marker())


def should_reflect(stream: MemoryStream, threshold: int) -> bool:
    """True once the since-marker sum strictly exceeds the threshold."""
    if threshold < 1:
        raise ValueError("reflection threshold must be >= 1")
    return cumulative_poignancy(stream) > threshold


def _parse_lines(text: str) -> list[str]:
    """Split a narrator reply into list items, tolerating bullet/number
    prefixes."""
    items = []
    for line in text.splitlines():
        cleaned = re.sub(r"^\s*(?:[-*]|\d+[.)])\s*", "", line).strip()
        if cleaned:
            items.append(cleaned)
    return items


def reflect(
    stream: MemoryStream,
    narrator: Narrator,
    sim_time: datetime,
    agent: str = "the agent",
    system_context: str = GENERIC_SYSTEM_CONTEXT,
) -> ReflectionBatch:
    """Run the three-step reflection chain and fold the answers back in.

    The chain is atomic: if any narrator call fails or returns an unusable
    list, the stream is left untouched and the error propagates. On success
    each answer is appended as a ``reflection`` record (rated like any
    other) and the marker advances to the max id that existed beforehand.
    """
    sources = stream.since_marker()
    if not sources:
        raise ValueError("nothing to reflect on")
    pre_max_id = stream.records[-1].id
    memories = "\n".join(f"- {r.text}" for r in sources)
    date = format_sim_date(sim_time)

    topics_reply = narrator.complete(
        prompts.build_request(
            "reflection-topics", system_context, agent=agent, sim_date=date, memories=memories
        )
    )
    topics = _parse_lines(topics_reply.text)
    if not topics:
        raise NarratorError("reflection produced no salient topics")

    questions_reply = narrator.complete(
        prompts.build_request(
            "reflection-questions",
            system_context,
            agent=agent,
            sim_date=date,
            memories=memories,
            topics="\n".join(topics),
        )
    )
    questions = _parse_lines(questions_reply.text)
    if not questions:
        raise NarratorError("reflection produced no questions")

    answers_reply = narrator.complete(
        prompts.build_request(
            "reflection-answers",
            system_context,
            agent=agent,
            sim_date=date,
            memories=memories,
            topics="\n".join(topics),
            questions="\n".join(questions),
        )
    )
    answers = _parse_lines(answers_reply.text)
    if not answers:
        raise NarratorError("reflection produced no answers")
    paired = min(len(questions), len(answers))
    questions, answers = questions[:paired], answers[:paired]

    for answer in answers:
        append_memory(stream, sim_time, "reflection", answer, narrator)
    stream.last_reflection_marker = pre_max_id
    return ReflectionBatch(
        source_record_ids=[r.id for r in sources],
        salient_topics=topics,
        questions=questions,
        answers=answers,
    )


def _keyword_overlap(query_words: frozenset[str], text: str) -> float:
    words = frozenset(_WORD.findall(text.lower()))
    if not query_words or not words:
        return 0.0
    return len(query_words & words) / len(query_words | words)


def retrieve_context(stream: MemoryStream, query: str, budget: int) -> list[MemoryRecord]:
    """Pick the ``budget`` most relevant records for a prompt.

    Score per record: recency (exponential decay over simulated ticks),
    normalised poignancy and keyword overlap with the query, weighted
    0.5/0.3/0.2. Ties go to the newer record; results come back in
    chronological order. Pure: same stream, query and budget always give
    the same answer.
    """
    if budget < 1:
        raise ValueError("retrieval budget must be >= 1")
    if not stream.records:
        return []
    anchor = max(r.sim_time for r in stream.records)
    query_words = frozenset(_WORD.findall(query.lower()))

    def score(record: MemoryRecord) -> float:
        age_ticks = (anchor - record.sim_time).total_seconds() / 3600.0 / TICK_HOURS
        recency = math.exp(-age_ticks / RETRIEVAL_HALF_LIFE_TICKS)
        return (
            RETRIEVAL_RECENCY_WEIGHT * recency
            + RETRIEVAL_POIGNANCY_WEIGHT * (record.poignancy / 10.0)
            + RETRIEVAL_KEYWORD_WEIGHT * _keyword_overlap(query_words, record.text)
        )

    ranked = sorted(stream.records, key=lambda r: (score(r), r.id), reverse=True)
    return sorted(ranked[:budget], key=lambda r: r.id)
