"""Core domain types for the sandbox world.

Everything in here is a plain value type: the simulation clock, agents and
their memory streams, locations, narrative shifts, the governing rules and
the world that ties them together. No narrator calls, no I/O. Behaviour
lives in the engine; this module only knows how to advance the clock,
validate a world and project the operator-facing summary.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta

MEMORY_KINDS = (
    "observation",
    "action",
    "dialogue",
    "dialogue-summary",
    "reflection",
    "narrative",
)

POIGNANCY_MIN = 1
POIGNANCY_MAX = 10

# creator tag for locations present in the initial world spec
INIT_CREATOR = "init"
SHIFT_CREATOR = "narrative-shift"


class ClockRangeError(Exception):
    """Raised when clock arithmetic leaves the supported calendar range."""


def format_sim_date(moment: datetime) -> str:
    """Render a sim timestamp the way the interface shows it, e.g.
    ``May 18, 2027, 21:00``."""
    return f"{moment.strftime('%B')} {moment.day:02d}, {moment.year}, {moment.strftime('%H:%M')}"


@dataclass
class SimClock:
    """Simulation clock ticking in fixed recursions (default two hours).

    ``era_start_time``/``era_start_tick`` anchor the current narrative era:
    a narrative shift jumps ``sim_time`` years ahead without touching the
    tick cadence, so elapsed time is only proportional to ticks within an
    era.
    """

    sim_time: datetime
    tick_index: int = 0
    ticks_per_day: int = 12
    tick_duration: timedelta = timedelta(hours=2)
    era_start_time: datetime | None = None
    era_start_tick: int = 0

    def __post_init__(self) -> None:
        if self.era_start_time is None:
            self.era_start_time = self.sim_time


def advance_clock(clock: SimClock, n_ticks: int) -> SimClock:
    """Advance the clock by ``n_ticks`` ticks, returning a new clock.

    Raises ``ValueError`` for a non-positive tick count and
    ``ClockRangeError`` when the calendar runs past year 9999.
    """
    if n_ticks < 1:
        raise ValueError(f"n_ticks must be >= 1, got {n_ticks}")
    try:
        new_time = clock.sim_time + clock.tick_duration * n_ticks
    except OverflowError as exc:
        raise ClockRangeError("sim_time past supported calendar range") from exc
    return replace(clock, sim_time=new_time, tick_index=clock.tick_index + n_ticks)


@dataclass
class MemoryRecord:
    """One timestamped experience in an agent's memory stream."""

    id: int
    sim_time: datetime
    kind: str
    text: str
    poignancy: int


@dataclass
class MemoryStream:
    """Append-only record of an agent's experiences.

    ``last_reflection_marker`` is the highest record id already folded into
    a reflection (0 if the agent has never reflected).
    """

    records: list[MemoryRecord] = field(default_factory=list)
    last_reflection_marker: int = 0

    def next_id(self) -> int:
        return self.records[-1].id + 1 if self.records else 1

    def since_marker(self) -> list[MemoryRecord]:
        return [r for r in self.records if r.id > self.last_reflection_marker]


@dataclass
class Objective:
    actor: str
    text: str
    target_location: str | None = None
    set_at: datetime | None = None


@dataclass
class AgentProfile:
    """An inhabitant of the world with an evolving description.

    ``description_history`` is append-only; each rewrite (mutation or
    shift-driven hybridisation) adds an entry, so
    ``mutation_count == len(description_history) - 1`` always holds.
    """

    name: str
    description_history: list[tuple[datetime, str]]
    current_location: str
    current_objective: Objective | None = None
    memory: MemoryStream = field(default_factory=MemoryStream)
    mutation_count: int = 0

    @property
    def description(self) -> str:
        return self.description_history[-1][1]


@dataclass
class Location:
    name: str
    description_history: list[tuple[datetime, str]]
    created_at: datetime
    created_by: str

    @property
    def description(self) -> str:
        return self.description_history[-1][1]


@dataclass
class StateDelta:
    """One typed world change produced by resolving an action."""

    kind: str  # move-agent | create-memory | modify-location-description | create-descriptive-entity
    target: str = ""
    text: str = ""


@dataclass
class ActionEffect:
    """Adjudicated outcome of an agent action: the four answers plus the
    structural deltas to apply."""

    actor: str
    basis: str
    relation: str
    result: str
    state_deltas: list[StateDelta] = field(default_factory=list)


@dataclass
class NarrativeShift:
    """A day-boundary world transformation."""

    index: int
    occurred_at_tick: int
    from_date: datetime
    to_date: datetime
    shift_text: str
    new_locations: list[tuple[str, str]] = field(default_factory=list)
    agent_rewrites: dict[str, str] = field(default_factory=dict)
    new_descriptive_entities: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class GoverningRules:
    """Ordered rule book injected into every narrator exchange."""

    rules: list[tuple[str, str]] = field(default_factory=list)

    def names(self) -> list[str]:
        return [name for name, _ in self.rules]


@dataclass
class EngineConfig:
    """Knobs for the simulation loop.

    Probabilities are per agent-tick (dialogue: per co-located pair-tick).
    ``real_time_pacing_ms`` throttles live runs; 1_800_000 reproduces a
    half-hour of wall time per tick.
    """

    reflection_threshold: int = 100
    p_mutation: float = 0.05
    p_location: float = 0.08
    p_agent_dialogue: float = 0.25
    max_agent_dialogue_turns: int = 8
    shift_jump_years: int = 2
    shift_jitter_days: int = 90
    real_time_pacing_ms: int = 0


@dataclass
class WorldState:
    """The entire sandbox: clock, geography, agents, history and config."""

    name: str
    clock: SimClock
    environment: str
    story_objective: str
    locations: dict[str, Location] = field(default_factory=dict)
    agents: dict[str, AgentProfile] = field(default_factory=dict)
    descriptive_entities: dict[str, str] = field(default_factory=dict)
    shifts: list[NarrativeShift] = field(default_factory=list)
    rules: GoverningRules = field(default_factory=GoverningRules)
    rng_seed: int = 0
    config: EngineConfig = field(default_factory=EngineConfig)


@dataclass
class SimulationSummary:
    """The six-field projection shown to the operator after each dialogue."""

    simulation_time: str
    environment: str
    last_narrative_shift: str
    locations: list[tuple[str, str]]
    agent_locations: dict[str, str]
    character_descriptions: dict[str, str]


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _check_history(owner: str, history: list[tuple[datetime, str]], out: list[str]) -> None:
    if not history:
        out.append(f"{owner}: description_history is empty")
        return
    for i in range(1, len(history)):
        if history[i][0] < history[i - 1][0]:
            out.append(f"{owner}: description_history timestamps decrease at entry {i}")


def _check_stream(owner: str, stream: MemoryStream, out: list[str]) -> None:
    prev_id = 0
    for record in stream.records:
        if record.id <= prev_id:
            out.append(f"{owner}: memory record id {record.id} not strictly increasing")
        prev_id = record.id
        if not (POIGNANCY_MIN <= record.poignancy <= POIGNANCY_MAX):
            out.append(
                f"{owner}: memory record {record.id} poignancy {record.poignancy} "
                f"outside [{POIGNANCY_MIN},{POIGNANCY_MAX}]"
            )
        if record.kind not in MEMORY_KINDS:
            out.append(f"{owner}: memory record {record.id} has unknown kind '{record.kind}'")
        if not record.text:
            out.append(f"{owner}: memory record {record.id} has empty text")
    max_id = stream.records[-1].id if stream.records else 0
    if stream.last_reflection_marker > max_id:
        out.append(
            f"{owner}: last_reflection_marker {stream.last_reflection_marker} "
            f"exceeds max record id {max_id}"
        )


def validate_world(world: WorldState) -> list[str]:
    """Check every structural invariant; returns one message per violation.

    An empty list means the world is valid. Violations are data, not
    exceptions: loaders and services decide what to do with them.
    """
    violations: list[str] = []
    clock = world.clock

    if clock.ticks_per_day < 1:
        violations.append(f"clock: ticks_per_day {clock.ticks_per_day} must be >= 1")
    era_ticks = clock.tick_index - clock.era_start_tick
    if era_ticks < 0:
        violations.append("clock: tick_index behind era_start_tick")
    elif clock.era_start_time is not None:
        expected = clock.era_start_time + clock.tick_duration * era_ticks
        if expected != clock.sim_time:
            violations.append(
                f"clock: sim_time {clock.sim_time.isoformat()} inconsistent with "
                f"{era_ticks} ticks since era start"
            )

    for name, location in world.locations.items():
        if location.name != name:
            violations.append(f"location {name}: registered under mismatched key")
        _check_history(f"location {name}", location.description_history, violations)

    for name, agent in world.agents.items():
        if agent.name != name:
            violations.append(f"agent {name}: registered under mismatched key")
        if agent.current_location not in world.locations:
            violations.append(
                f"agent {name}: current_location '{agent.current_location}' is not a registered location"
            )
        _check_history(f"agent {name}", agent.description_history, violations)
        if agent.description_history and agent.mutation_count != len(agent.description_history) - 1:
            violations.append(
                f"agent {name}: mutation_count {agent.mutation_count} != "
                f"{len(agent.description_history) - 1} description rewrites"
            )
        _check_stream(f"agent {name}", agent.memory, violations)

    jitter = timedelta(days=world.config.shift_jitter_days)
    for position, shift in enumerate(world.shifts, start=1):
        if shift.index != position:
            violations.append(f"shift {shift.index}: expected contiguous index {position}")
        if shift.to_date <= shift.from_date:
            violations.append(f"shift {shift.index}: to_date not after from_date")
        else:
            nominal = _add_years(shift.from_date, world.config.shift_jump_years)
            if not (nominal - jitter <= shift.to_date <= nominal + jitter):
                violations.append(
                    f"shift {shift.index}: to_date {shift.to_date.isoformat()} outside "
                    f"jump window of {world.config.shift_jump_years}y +/- {world.config.shift_jitter_days}d"
                )

    seen_rules: set[str] = set()
    for rule_name, _ in world.rules.rules:
        if rule_name in seen_rules:
            violations.append(f"rule {rule_name}: duplicate rule name")
        seen_rules.add(rule_name)

    for label, p in (
        ("p_mutation", world.config.p_mutation),
        ("p_location", world.config.p_location),
        ("p_agent_dialogue", world.config.p_agent_dialogue),
    ):
        if not (0.0 <= p <= 1.0):
            violations.append(f"config: {label} {p} outside [0,1]")
    if world.config.reflection_threshold < 1:
        violations.append("config: reflection_threshold must be >= 1")
    if world.config.max_agent_dialogue_turns < 1:
        violations.append("config: max_agent_dialogue_turns must be >= 1")

    return violations


def _add_years(moment: datetime, years: int) -> datetime:
    try:
        return moment.replace(year=moment.year + years)
    except ValueError:  # Feb 29 landing on a non-leap year
        return moment.replace(year=moment.year + years, day=28)
    except OverflowError as exc:
        raise ClockRangeError("shift jump past supported calendar range") from exc


def add_years(moment: datetime, years: int) -> datetime:
    """Proleptic-Gregorian year jump, clamping Feb 29 to Feb 28."""
    if moment.year + years > 9999:
        raise ClockRangeError("shift jump past supported calendar range")
    return _add_years(moment, years)


# ---------------------------------------------------------------------------
# summary projection
# ---------------------------------------------------------------------------


def project_summary(world: WorldState) -> SimulationSummary:
    """Pure projection of the world into the operator summary.

    Locations are sorted by name; the last-shift section falls back to the
    initial environment paragraph while no shift has happened yet.
    """
    last_shift = world.shifts[-1].shift_text if world.shifts else world.environment
    return SimulationSummary(
        simulation_time=format_sim_date(world.clock.sim_time),
        environment=world.environment,
        last_narrative_shift=last_shift,
        locations=[(name, world.locations[name].description) for name in sorted(world.locations)],
        agent_locations={name: world.agents[name].current_location for name in sorted(world.agents)},
        character_descriptions={name: world.agents[name].description for name in sorted(world.agents)},
    )
