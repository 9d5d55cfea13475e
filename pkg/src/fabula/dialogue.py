"""Human-in-the-loop dialogue sessions.

The operator can open a conversation with any agent at any time,
independently of the tick cadence. Turns live only in the session
transcript; the agent's memory is touched once, at conclusion, when the
narrator summarises the exchange from the agent's perspective and the
summary enters the stream as a ``dialogue-summary`` record.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from datetime import datetime

from fabula.memory import append_memory, retrieve_context
from fabula.model import WorldState, format_sim_date
from fabula.narrator import Narrator, NarratorError, prompts
from fabula.engine import DEFAULT_CONTEXT_BUDGET, transcript_lines, system_context
from fabula.worldseed import DEFAULT_HUMAN_LABEL

STATE_OPEN = "open"
STATE_CONCLUDED = "concluded"


class SessionNotFoundError(Exception):
    """No such agent or session."""


class SessionStateError(Exception):
    """Operation not allowed in the session's current state."""


@dataclass
class TranscriptTurn:
    speaker: str
    text: str
    at: datetime


@dataclass
class DialogueSession:
    id: str
    human_label: str
    agent_name: str
    opened_at_tick: int
    transcript: list[TranscriptTurn] = field(default_factory=list)
    state: str = STATE_OPEN
    pending_failed: bool = False


def open_session(
    world: WorldState,
    agent_name: str,
    human_label: str = DEFAULT_HUMAN_LABEL,
    session_id: str | None = None,
) -> tuple[DialogueSession, list[str]]:
    """Open a session with an agent; descriptive entities don't qualify."""
    if agent_name not in world.agents:
        raise SessionNotFoundError(f"unknown agent '{agent_name}'")
    session = DialogueSession(
        id=session_id if session_id is not None else uuid.uuid4().hex,
        human_label=human_label,
        agent_name=agent_name,
        opened_at_tick=world.clock.tick_index,
    )
    return session, [f"Starting dialogue between {human_label} and {agent_name}."]


def post_message(
    session: DialogueSession,
    text: str,
    world: WorldState,
    narrator: Narrator,
    now: datetime | None = None,
) -> tuple[str, list[str]]:
    """Send one human turn and get the agent's reply.

    On narrator failure the human turn is kept and flagged pending-failed;
    posting the same text again retries the reply without duplicating the
    turn. Nothing enters the memory stream here.
    """
    if session.state != STATE_OPEN:
        raise SessionStateError(f"session {session.id} is {session.state}")
    if not text or not text.strip():
        raise ValueError("message text must be non-empty")
    text = text.strip()
    now = now if now is not None else datetime.now()
    events: list[str] = []

    retrying_pending = (
        session.pending_failed
        and session.transcript
        and session.transcript[-1].speaker == session.human_label
        and session.transcript[-1].text == text
    )
    if not retrying_pending:
        session.transcript.append(TranscriptTurn(speaker=session.human_label, text=text, at=now))
        events.append(f'- {session.human_label} said "{text}"')

    agent = world.agents[session.agent_name]
    context = retrieve_context(agent.memory, text, DEFAULT_CONTEXT_BUDGET)
    request = prompts.build_request(
        "human-dialogue-turn",
        system_context(world),
        agent=agent.name,
        location=agent.current_location,
        sim_date=format_sim_date(world.clock.sim_time),
        human=session.human_label,
        description=agent.description,
        context="\n".join(f"- {r.text}" for r in context) or "(no memories yet)",
        transcript=transcript_lines([(t.speaker, t.text) for t in session.transcript]),
    )
    try:
        reply = narrator.complete(request)
    except NarratorError:
        session.pending_failed = True
        raise
    session.pending_failed = False
    reply_text = reply.text.strip()
    session.transcript.append(TranscriptTurn(speaker=agent.name, text=reply_text, at=now))
    events.append(f'- {agent.name} said "{reply_text}"')
    return reply_text, events


def conclude_session(
    session: DialogueSession,
    world: WorldState,
    narrator: Narrator,
) -> tuple[list[int], list[str]]:
    """Fold the conversation back into the agent's memory and close it.

    One conclusion per participating agent (the human holds no stream), so
    exactly one ``dialogue-summary`` record lands. The session only flips
    to concluded after the narrator call succeeds, which keeps a failed
    conclude retriable.
    """
    if session.state != STATE_OPEN:
        raise SessionStateError(f"session {session.id} is {session.state}")
    agent = world.agents[session.agent_name]
    conclusion = narrator.complete(
        prompts.build_request(
            "dialogue-conclusion",
            system_context(world),
            agent=agent.name,
            sim_date=format_sim_date(world.clock.sim_time),
            transcript=transcript_lines([(t.speaker, t.text) for t in session.transcript]),
        )
    )
    summary = conclusion.text.strip()
    record = append_memory(agent.memory, world.clock.sim_time, "dialogue-summary", summary, narrator)
    session.state = STATE_CONCLUDED
    events = [f"Conclude the dialogue between {session.human_label} and {agent.name}."]
    return [record.id], events
