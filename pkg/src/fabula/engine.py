"""The simulation loop.

One tick is two hours of simulated time. Within a tick every agent (in name
order) picks an objective and acts on it; co-located pairs may talk; agents
who talked may reflect; agents may found locations or mutate; the clock
advances; and at each day boundary a narrative shift propels the world
about two years ahead. All randomness is drawn from a generator derived
from the world's seed and the tick index, so a scripted run is fully
reproducible tick by tick.

``step_tick`` operates on a deep copy and returns the new world: if the
narrator becomes unavailable mid-tick the caller's world is untouched.
"""

from __future__ import annotations

import copy
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from itertools import combinations
from random import Random

from fabula.memory import append_memory, reflect, retrieve_context, should_reflect
from fabula.model import (
    INIT_CREATOR,
    SHIFT_CREATOR,
    ActionEffect,
    AgentProfile,
    EngineConfig,
    Location,
    MemoryRecord,
    NarrativeShift,
    Objective,
    SimulationSummary,
    StateDelta,
    WorldState,
    add_years,
    advance_clock,
    format_sim_date,
    project_summary,
)
from fabula.narrator import Narrator, NarratorError, prompts
from fabula.worldseed import InitSpec

logger = logging.getLogger(__name__)

DEFAULT_CONTEXT_BUDGET = 6
DIALOGUE_END_MARKER = "[end-dialogue]"

_KEYED_LINE = re.compile(r"^([A-Z-]+):\s*(.*)$")


class InitError(Exception):
    """The initial world spec is unusable (duplicates, dangling references)."""


@dataclass
class DialogueTranscript:
    """An agent-to-agent conversation and its per-participant summaries."""

    participants: tuple[str, str]
    turns: list[tuple[str, str]] = field(default_factory=list)
    summaries: dict[str, str] = field(default_factory=dict)


@dataclass
class TickReport:
    """Everything one tick did, in the order it did it."""

    tick_index: int
    sim_time: datetime | None = None
    events: list[str] = field(default_factory=list)
    narrator_calls: int = 0
    shift: NarrativeShift | None = None
    transcripts: list[DialogueTranscript] = field(default_factory=list)
    summary_snapshots: list[SimulationSummary] = field(default_factory=list)


class _CountingNarrator:
    def __init__(self, inner: Narrator) -> None:
        self.inner = inner
        self.calls = 0

    def complete(self, request):
        self.calls += 1
        return self.inner.complete(request)


# ---------------------------------------------------------------------------
# world construction
# ---------------------------------------------------------------------------


def init_world(spec: InitSpec, seed: int) -> WorldState:
    """Build a fresh world from an init spec.

    Agents start with a single description entry and an empty memory
    stream; the governing rules come straight from the spec.
    """
    if not spec.locations:
        raise InitError("init spec needs at least one location")
    if not spec.agents:
        raise InitError("init spec needs at least one agent")

    world = WorldState(
        name=spec.name,
        clock=spec.make_clock(),
        environment=spec.environment,
        story_objective=spec.story_objective,
        rules=spec.make_rules(),
        rng_seed=seed,
        config=copy.deepcopy(spec.config),
    )
    for loc_name, description in spec.locations:
        if loc_name in world.locations:
            raise InitError(f"duplicate location name '{loc_name}'")
        world.locations[loc_name] = Location(
            name=loc_name,
            description_history=[(spec.start_time, description)],
            created_at=spec.start_time,
            created_by=INIT_CREATOR,
        )
    for agent_seed in spec.agents:
        if agent_seed.name in world.agents:
            raise InitError(f"duplicate agent name '{agent_seed.name}'")
        if agent_seed.location not in world.locations:
            raise InitError(f"agent '{agent_seed.name}' starts at unknown location '{agent_seed.location}'")
        world.agents[agent_seed.name] = AgentProfile(
            name=agent_seed.name,
            description_history=[(spec.start_time, agent_seed.description)],
            current_location=agent_seed.location,
        )
    world.descriptive_entities.update(spec.descriptive_entities)
    return world


def init_events(world: WorldState, from_disk: bool = False) -> list[str]:
    """The boot log lines for a fresh or reloaded world."""
    events = [f"Initialising {world.name}."]
    if from_disk:
        events.append("Loading world from memory.")
    for name in sorted(world.agents):
        events.append(f"Initialising {name}...")
        events.append(f"{name} memory loaded from disk." if from_disk else f"{name} initialised fresh.")
    events.append(f"It is {format_sim_date(world.clock.sim_time)}.")
    return events


def system_context(world: WorldState) -> str:
    rules = "\n".join(f"{name}: {definition}" for name, definition in world.rules.rules)
    return prompts.render(
        "system",
        world_name=world.name,
        environment=world.environment,
        story_objective=world.story_objective,
        rules=rules or "(none)",
    )


def _context_lines(records: list[MemoryRecord]) -> str:
    return "\n".join(f"- {r.text}" for r in records) or "(no memories yet)"


def transcript_lines(turns: list[tuple[str, str]]) -> str:
    return "\n".join(f"{speaker}: {text}" for speaker, text in turns) or "(no turns yet)"


def derive_tick_rng(seed: int, tick_index: int) -> Random:
    # string seeding hashes via sha512: stable across processes and machines
    return Random(f"{seed}:{tick_index}")


# ---------------------------------------------------------------------------
# per-agent behaviour
# ---------------------------------------------------------------------------


def choose_objective(
    agent: AgentProfile,
    world: WorldState,
    narrator: Narrator,
    events: list[str] | None = None,
) -> Objective | None:
    """Ask the narrator for the agent's next objective.

    On narrator failure the agent idles this tick: no objective, one log
    line, the world otherwise untouched.
    """
    events = events if events is not None else []
    context = retrieve_context(agent.memory, world.story_objective, DEFAULT_CONTEXT_BUDGET)
    request = prompts.build_request(
        "choose-objective",
        system_context(world),
        agent=agent.name,
        location=agent.current_location,
        sim_date=format_sim_date(world.clock.sim_time),
        description=agent.description,
        story_objective=world.story_objective,
        context=_context_lines(context),
    )
    try:
        reply = narrator.complete(request)
    except NarratorError:
        events.append(f"{agent.name} idle (narrator unavailable)")
        return None
    text = next((line.strip() for line in reply.text.splitlines() if line.strip()), "")
    if not text:
        events.append(f"{agent.name} idle (narrator unavailable)")
        return None
    objective = Objective(
        actor=agent.name,
        text=text,
        target_location=_find_location_name(text, world),
        set_at=world.clock.sim_time,
    )
    agent.current_objective = objective
    events.append(f"objective: {text}")
    return objective


def _find_location_name(text: str, world: WorldState) -> str | None:
    lowered = text.lower()
    best = None
    for name in sorted(world.locations):
        if name.lower() in lowered and (best is None or len(name) > len(best)):
            best = name
    return best


def parse_action_reply(text: str) -> ActionEffect | None:
    """Parse the four answers plus delta lines; None when no usable RESULT."""
    fields = {"ACTOR": "", "BASIS": "", "RELATION": "", "RESULT": ""}
    deltas: list[StateDelta] = []
    for line in text.splitlines():
        match = _KEYED_LINE.match(line.strip())
        if not match:
            continue
        key, value = match.group(1), match.group(2).strip()
        if key in fields:
            fields[key] = value
        elif key == "MOVE" and value:
            deltas.append(StateDelta(kind="move-agent", target=value))
        elif key == "MEMORY" and value:
            deltas.append(StateDelta(kind="create-memory", text=value))
        elif key in ("LOCATION-DESC", "ENTITY") and "|" in value:
            target, desc = (part.strip() for part in value.split("|", 1))
            kind = "modify-location-description" if key == "LOCATION-DESC" else "create-descriptive-entity"
            if target and desc:
                deltas.append(StateDelta(kind=kind, target=target, text=desc))
    if not fields["RESULT"]:
        return None
    return ActionEffect(
        actor=fields["ACTOR"],
        basis=fields["BASIS"],
        relation=fields["RELATION"],
        result=fields["RESULT"],
        state_deltas=deltas,
    )


def resolve_action(
    agent: AgentProfile,
    objective: Objective,
    world: WorldState,
    narrator: Narrator,
    events: list[str] | None = None,
) -> ActionEffect:
    """Adjudicate the agent's action and apply its world changes.

    The narrator answers the four action questions (actor, basis, relation,
    result) in one exchange; deltas are applied in listed order, each
    rejected individually if it references an unknown identifier. An
    unparsable reply earns one reprompt, then a logged no-op.
    """
    if objective.actor != agent.name:
        raise ValueError(f"objective belongs to {objective.actor}, not {agent.name}")
    events = events if events is not None else []
    context = retrieve_context(agent.memory, objective.text, DEFAULT_CONTEXT_BUDGET)
    request = prompts.build_request(
        "resolve-action",
        system_context(world),
        agent=agent.name,
        location=objective.target_location or agent.current_location,
        sim_date=format_sim_date(world.clock.sim_time),
        objective=objective.text,
        description=agent.description,
        context=_context_lines(context),
    )
    effect = None
    for _ in range(2):
        reply = narrator.complete(request)
        effect = parse_action_reply(reply.text)
        if effect is not None:
            break
    if effect is None:
        events.append(f"action unresolved for {agent.name} (unparsable reply)")
        return ActionEffect(actor=agent.name, basis="", relation="", result="", state_deltas=[])

    recorded_memory = False
    for delta in effect.state_deltas:
        if delta.kind == "move-agent":
            if delta.target in world.locations:
                agent.current_location = delta.target
            else:
                events.append(f"delta rejected: unknown location '{delta.target}'")
        elif delta.kind == "create-memory":
            append_memory(agent.memory, world.clock.sim_time, "action", delta.text, narrator)
            recorded_memory = True
        elif delta.kind == "modify-location-description":
            location = world.locations.get(delta.target)
            if location is None:
                events.append(f"delta rejected: unknown location '{delta.target}'")
            else:
                location.description_history.append((world.clock.sim_time, delta.text))
        elif delta.kind == "create-descriptive-entity":
            world.descriptive_entities[delta.target] = delta.text
    if not recorded_memory:
        # every applied action leaves a trace in its actor's stream
        append_memory(agent.memory, world.clock.sim_time, "action", effect.result, narrator)
    events.append(f"action: {effect.result}")
    return effect


def agent_dialogue(
    agent_a: AgentProfile,
    agent_b: AgentProfile,
    world: WorldState,
    narrator: Narrator,
    max_turns: int,
    events: list[str] | None = None,
) -> DialogueTranscript:
    """Run an autonomous conversation between two co-located agents.

    Turns alternate starting with ``agent_a`` and stop at ``max_turns`` or
    at a turn carrying the end marker. A narrator failure mid-dialogue
    truncates at the last good turn; the per-participant conclusions are
    still generated from whatever transcript exists and appended as
    ``dialogue-summary`` memories.
    """
    if agent_a.current_location != agent_b.current_location:
        raise ValueError(f"{agent_a.name} and {agent_b.name} are not co-located")
    events = events if events is not None else []
    events.append(f"Starting dialogue between {agent_a.name} and {agent_b.name}.")
    transcript = DialogueTranscript(participants=(agent_a.name, agent_b.name))

    for turn_index in range(max_turns):
        speaker, partner = (agent_a, agent_b) if turn_index % 2 == 0 else (agent_b, agent_a)
        context = retrieve_context(
            speaker.memory, f"{partner.name} {world.story_objective}", DEFAULT_CONTEXT_BUDGET
        )
        request = prompts.build_request(
            "agent-dialogue-turn",
            system_context(world),
            agent=speaker.name,
            location=speaker.current_location,
            sim_date=format_sim_date(world.clock.sim_time),
            partner=partner.name,
            turn_count=str(turn_index),
            description=speaker.description,
            context=_context_lines(context),
            transcript=transcript_lines(transcript.turns),
        )
        try:
            reply = narrator.complete(request)
        except NarratorError:
            events.append("dialogue interrupted (narrator unavailable)")
            break
        text = reply.text.strip()
        ended = DIALOGUE_END_MARKER in text
        text = text.replace(DIALOGUE_END_MARKER, "").strip()
        if not text:
            break
        transcript.turns.append((speaker.name, text))
        events.append(f'- {speaker.name} said "{text}"')
        if ended:
            break

    if transcript.turns:
        for participant in (agent_a, agent_b):
            conclusion = narrator.complete(
                prompts.build_request(
                    "dialogue-conclusion",
                    system_context(world),
                    agent=participant.name,
                    sim_date=format_sim_date(world.clock.sim_time),
                    transcript=transcript_lines(transcript.turns),
                )
            )
            summary = conclusion.text.strip()
            transcript.summaries[participant.name] = summary
            append_memory(participant.memory, world.clock.sim_time, "dialogue-summary", summary, narrator)
    return transcript


def maybe_mutate(
    agent: AgentProfile,
    world: WorldState,
    narrator: Narrator,
    rng: Random,
    p: float,
    events: list[str] | None = None,
) -> str | None:
    """Roll for a character rewrite; on success the narrator writes the new
    description, which is appended to the agent's history."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("mutation probability must be in [0,1]")
    events = events if events is not None else []
    if rng.random() >= p:
        return None
    context = retrieve_context(agent.memory, agent.description, DEFAULT_CONTEXT_BUDGET)
    try:
        reply = narrator.complete(
            prompts.build_request(
                "mutation-rewrite",
                system_context(world),
                agent=agent.name,
                location=agent.current_location,
                sim_date=format_sim_date(world.clock.sim_time),
                description=agent.description,
                context=_context_lines(context),
            )
        )
    except NarratorError:
        return None
    rewrite = reply.text.strip()
    if not rewrite:
        return None
    agent.description_history.append((world.clock.sim_time, rewrite))
    agent.mutation_count += 1
    events.append(f"{agent.name} mutated.")
    return rewrite


def _roman(n: int) -> str:
    numerals = (
        (100, "C"), (90, "XC"), (50, "L"), (40, "XL"),
        (10, "X"), (9, "IX"), (5, "V"), (4, "IV"), (1, "I"),
    )
    out = []
    for value, token in numerals:
        while n >= value:
            out.append(token)
            n -= value
    return "".join(out)


def dedupe_location_name(name: str, world: WorldState) -> str:
    if name not in world.locations:
        return name
    suffix = 2
    while f"{name} {_roman(suffix)}" in world.locations:
        suffix += 1
    return f"{name} {_roman(suffix)}"


def maybe_create_location(
    agent: AgentProfile,
    world: WorldState,
    narrator: Narrator,
    rng: Random,
    p: float,
    events: list[str] | None = None,
) -> Location | None:
    """Roll for location genesis; colliding names get a numeral suffix."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("location probability must be in [0,1]")
    events = events if events is not None else []
    if rng.random() >= p:
        return None
    context = retrieve_context(agent.memory, agent.current_location, DEFAULT_CONTEXT_BUDGET)
    try:
        reply = narrator.complete(
            prompts.build_request(
                "location-genesis",
                system_context(world),
                agent=agent.name,
                location=agent.current_location,
                sim_date=format_sim_date(world.clock.sim_time),
                description=agent.description,
                context=_context_lines(context),
            )
        )
    except NarratorError:
        return None
    first_line = next((line.strip() for line in reply.text.splitlines() if line.strip()), "")
    if "|" in first_line:
        raw_name, description = (part.strip() for part in first_line.split("|", 1))
    else:
        raw_name, description = first_line, "A place without a story yet."
    if not raw_name:
        events.append(f"location genesis unresolved for {agent.name} (unparsable reply)")
        return None
    name = dedupe_location_name(raw_name, world)
    location = Location(
        name=name,
        description_history=[(world.clock.sim_time, description)],
        created_at=world.clock.sim_time,
        created_by=agent.name,
    )
    world.locations[name] = location
    events.append(f"New location: {name}.")
    return location


# ---------------------------------------------------------------------------
# narrative shifts
# ---------------------------------------------------------------------------


def _day_digest(world: WorldState) -> str:
    """Each agent's memories from the concluding day, for the shift prompt."""
    day_start = world.clock.sim_time - timedelta(hours=24)
    lines = []
    for name in sorted(world.agents):
        for record in world.agents[name].memory.records:
            if record.sim_time >= day_start:
                lines.append(f"{name}: {record.text}")
    return "\n".join(lines) or "(an uneventful day)"


def format_summary_text(summary: SimulationSummary) -> str:
    """Render the six summary sections as the interface presents them."""
    parts = [
        "Simulation Time",
        summary.simulation_time,
        "",
        "Environment",
        summary.environment,
        "",
        "Last narrative shift",
        summary.last_narrative_shift,
        "",
        "Locations",
    ]
    if summary.locations:
        parts.extend(f"{name}: {description}" for name, description in summary.locations)
    else:
        parts.append("none")
    parts.extend(["", "Agent Locations"])
    parts.extend(f"{agent}: {location}" for agent, location in summary.agent_locations.items())
    parts.extend(["", "Character Descriptions"])
    parts.extend(f"{agent}: {description}" for agent, description in summary.character_descriptions.items())
    return "\n".join(parts)


def parse_shift_reply(text: str) -> dict | None:
    """Split a shift reply into its sections; None when SHIFT is missing."""
    parsed = {"shift": "", "environment": "", "locations": [], "rewrites": [], "entities": []}
    for line in text.splitlines():
        match = _KEYED_LINE.match(line.strip())
        if not match:
            continue
        key, value = match.group(1), match.group(2).strip()
        if key == "SHIFT":
            parsed["shift"] = value
        elif key == "ENVIRONMENT":
            parsed["environment"] = value
        elif key in ("LOCATION", "REWRITE", "ENTITY") and "|" in value:
            target, description = (part.strip() for part in value.split("|", 1))
            if target and description:
                bucket = {"LOCATION": "locations", "REWRITE": "rewrites", "ENTITY": "entities"}[key]
                parsed[bucket].append((target, description))
    return parsed if parsed["shift"] else None


QUIET_ERA_TEXT = "A quiet era passes; the world endures, largely unchanged."


def narrative_shift(
    world: WorldState,
    narrator: Narrator,
    rng: Random | None = None,
    events: list[str] | None = None,
) -> NarrativeShift:
    """Close the simulated day: jump the clock about two years and apply
    the narrator's transformation of the world.

    Existing locations are never deleted; a LOCATION line naming one
    rewrites its description instead (history preserved). An unparsable
    reply after one reprompt degrades to a quiet era: the clock still
    jumps, everything else stays.
    """
    events = events if events is not None else []
    rng = rng if rng is not None else derive_tick_rng(world.rng_seed, world.clock.tick_index)
    config = world.config
    from_date = world.clock.sim_time
    jitter_days = rng.randint(-config.shift_jitter_days, config.shift_jitter_days) if config.shift_jitter_days else 0
    to_date = add_years(from_date, config.shift_jump_years) + timedelta(days=jitter_days)
    shift_index = len(world.shifts) + 1

    request = prompts.build_request(
        "narrative-shift",
        system_context(world),
        sim_date=format_sim_date(from_date),
        shift_index=str(shift_index),
        world_name=world.name,
        digest=_day_digest(world),
        summary=format_summary_text(project_summary(world)),
    )
    parsed = None
    for _ in range(2):
        reply = narrator.complete(request)
        parsed = parse_shift_reply(reply.text)
        if parsed is not None:
            break

    shift = NarrativeShift(
        index=shift_index,
        occurred_at_tick=world.clock.tick_index,
        from_date=from_date,
        to_date=to_date,
        shift_text=parsed["shift"] if parsed else QUIET_ERA_TEXT,
    )
    world.clock.sim_time = to_date
    world.clock.era_start_time = to_date
    world.clock.era_start_tick = world.clock.tick_index

    if parsed is None:
        events.append("narrative shift unresolved; a quiet era passes.")
    else:
        if parsed["environment"]:
            world.environment = parsed["environment"]
        for name, description in parsed["locations"]:
            existing = world.locations.get(name)
            if existing is not None:
                existing.description_history.append((to_date, description))
            else:
                world.locations[name] = Location(
                    name=name,
                    description_history=[(to_date, description)],
                    created_at=to_date,
                    created_by=SHIFT_CREATOR,
                )
                shift.new_locations.append((name, description))
                events.append(f"New location: {name}.")
        for agent_name, description in parsed["rewrites"]:
            agent = world.agents.get(agent_name)
            if agent is None:
                continue
            agent.description_history.append((to_date, description))
            agent.mutation_count += 1
            shift.agent_rewrites[agent_name] = description
        for name, description in parsed["entities"]:
            world.descriptive_entities[name] = description
            shift.new_descriptive_entities.append((name, description))

    world.shifts.append(shift)
    for name in sorted(world.agents):
        append_memory(world.agents[name].memory, to_date, "narrative", shift.shift_text, narrator)
    events.append(f"Narrative shift {shift.index}: {shift.shift_text}")
    events.append(f"It is {format_sim_date(to_date)}.")
    return shift


# ---------------------------------------------------------------------------
# the tick
# ---------------------------------------------------------------------------


def step_tick(
    world: WorldState,
    narrator: Narrator,
    rng: Random | None = None,
) -> tuple[WorldState, TickReport]:
    """Advance the world one tick, returning the new world and its report.

    Phases, in fixed order: per-agent objective and action (name order);
    dialogue rolls for co-located pairs (name order); reflection checks for
    agents whose streams gained dialogue since their last reflection;
    per-agent location-genesis and mutation rolls; clock advance; narrative
    shift at the day boundary. The input world is never mutated: a narrator
    outage mid-tick aborts the whole tick.
    """
    rng = rng if rng is not None else derive_tick_rng(world.rng_seed, world.clock.tick_index)
    working = copy.deepcopy(world)
    counting = _CountingNarrator(narrator)
    report = TickReport(tick_index=working.clock.tick_index, sim_time=working.clock.sim_time)
    events = report.events
    config = working.config

    for name in sorted(working.agents):
        agent = working.agents[name]
        events.append(f"[{name}, {agent.current_location}]")
        objective = choose_objective(agent, working, counting, events)
        if objective is not None:
            resolve_action(agent, objective, working, counting, events)

    names = sorted(working.agents)
    for name_a, name_b in combinations(names, 2):
        agent_a, agent_b = working.agents[name_a], working.agents[name_b]
        if agent_a.current_location != agent_b.current_location:
            continue
        if rng.random() < config.p_agent_dialogue:
            transcript = agent_dialogue(
                agent_a, agent_b, working, counting, config.max_agent_dialogue_turns, events
            )
            report.transcripts.append(transcript)
            report.summary_snapshots.append(project_summary(working))

    for name in names:
        agent = working.agents[name]
        has_new_dialogue = any(
            r.kind == "dialogue-summary" for r in agent.memory.since_marker()
        )
        if has_new_dialogue and should_reflect(agent.memory, config.reflection_threshold):
            try:
                batch = reflect(
                    agent.memory,
                    counting,
                    working.clock.sim_time,
                    agent=name,
                    system_context=system_context(working),
                )
            except NarratorError as exc:
                events.append(f"{name} failed to reflect ({exc})")
            else:
                events.append(f"{name} reflected on recent memories ({len(batch.answers)} reflections).")

    for name in names:
        agent = working.agents[name]
        maybe_create_location(agent, working, counting, rng, config.p_location, events)
        maybe_mutate(agent, working, counting, rng, config.p_mutation, events)

    working.clock = advance_clock(working.clock, 1)
    if working.clock.tick_index % working.clock.ticks_per_day == 0:
        report.shift = narrative_shift(working, counting, rng, events)

    report.narrator_calls = counting.calls
    return working, report
