"""Snapshots, the simulation text log, the prompt audit log and dataset export.

Snapshots are sorted-key JSON with an explicit ``format_version`` so two
saves of the same world are byte-identical and old readers fail loudly.
The audit log stores every narrator exchange verbatim as length-prefixed
``REQ``/``RSP`` records, which is what makes event-sourced replays possible.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

from fabula.model import (
    AgentProfile,
    EngineConfig,
    GoverningRules,
    Location,
    MemoryRecord,
    MemoryStream,
    NarrativeShift,
    Objective,
    SimClock,
    WorldState,
    validate_world,
)
from fabula.narrator import Narrator, NarratorError, NarratorRequest, NarratorResponse

FORMAT_VERSION = 1

SNAPSHOT_FILENAME = "world.snapshot.json"
LOG_FILENAME = "simulation.log"
AUDIT_FILENAME = "prompts.audit"
DATASET_DIRNAME = "datasets"

DATASET_SEPARATOR = "\n===\n"


class SnapshotVersionError(Exception):
    """Snapshot written by an unknown format version."""


class CorruptSnapshotError(Exception):
    """Snapshot decoded but the world violates its invariants."""

    def __init__(self, violations: list[str]):
        super().__init__("corrupt snapshot: " + "; ".join(violations))
        self.violations = violations


# ---------------------------------------------------------------------------
# time sources and the event log
# ---------------------------------------------------------------------------


class WallClock:
    """Real wall-clock timestamps for live operation."""

    def now(self) -> datetime:
        return datetime.now()


class FixedStepClock:
    """Deterministic timestamps: fixed start, fixed step per event.

    Golden runs and replays use this so logs are byte-identical across
    machines.
    """

    def __init__(self, start: datetime | None = None, step_seconds: int = 1) -> None:
        self.current = start if start is not None else datetime(2024, 1, 1, 0, 0, 0)
        self.step_seconds = step_seconds

    def now(self) -> datetime:
        stamp = self.current
        self.current = stamp + timedelta(seconds=self.step_seconds)
        return stamp


@dataclass
class LogEvent:
    real_time: datetime
    text: str


def format_log_line(event: LogEvent) -> str:
    return f"{event.real_time.strftime('%Y-%m-%dT%H:%M:%S')}: {event.text}"


class EventLog:
    """Line-oriented simulation log: one writer, flush per line.

    Keeps all lines in memory for cursor-based tailing; optionally mirrors
    them to a file.
    """

    def __init__(self, path: str | Path | None = None, time_source=None) -> None:
        self.path = Path(path) if path is not None else None
        self.time_source = time_source if time_source is not None else WallClock()
        self.lines: list[str] = []
        self._handle = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._handle = open(self.path, "a", encoding="utf-8", newline="\n")

    def append(self, text: str) -> str:
        line = append_log(self, LogEvent(real_time=self.time_source.now(), text=text))
        return line

    def tail(self, since_line: int = 0) -> tuple[list[str], int]:
        if since_line < 0:
            since_line = 0
        return self.lines[since_line:], len(self.lines)

    def write_line(self, line: str) -> None:
        self.lines.append(line)
        if self._handle is not None:
            self._handle.write(line + "\n")
            self._handle.flush()

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None


def append_log(sink: EventLog, event: LogEvent) -> str:
    """Format one event as ``<timestamp>: <text>`` and append it to the sink."""
    text = event.text.replace("\n", " ").replace("\r", " ")
    line = format_log_line(LogEvent(real_time=event.real_time, text=text))
    sink.write_line(line)
    return line


# ---------------------------------------------------------------------------
# snapshot encoding
# ---------------------------------------------------------------------------


def _enc_dt(moment: datetime) -> str:
    return moment.strftime("%Y-%m-%dT%H:%M")


def _dec_dt(raw: str) -> datetime:
    return datetime.fromisoformat(raw)


def _enc_history(history: list[tuple[datetime, str]]) -> list[list[str]]:
    return [[_enc_dt(moment), text] for moment, text in history]


def _dec_history(raw: list) -> list[tuple[datetime, str]]:
    return [(_dec_dt(moment), text) for moment, text in raw]


def world_to_dict(world: WorldState) -> dict:
    return {
        "name": world.name,
        "environment": world.environment,
        "story_objective": world.story_objective,
        "rng_seed": world.rng_seed,
        "clock": {
            "sim_time": _enc_dt(world.clock.sim_time),
            "tick_index": world.clock.tick_index,
            "ticks_per_day": world.clock.ticks_per_day,
            "tick_duration_minutes": int(world.clock.tick_duration.total_seconds() // 60),
            "era_start_time": _enc_dt(world.clock.era_start_time),
            "era_start_tick": world.clock.era_start_tick,
        },
        "locations": {
            name: {
                "description_history": _enc_history(loc.description_history),
                "created_at": _enc_dt(loc.created_at),
                "created_by": loc.created_by,
            }
            for name, loc in world.locations.items()
        },
        "agents": {
            name: {
                "description_history": _enc_history(agent.description_history),
                "current_location": agent.current_location,
                "current_objective": (
                    None
                    if agent.current_objective is None
                    else {
                        "actor": agent.current_objective.actor,
                        "text": agent.current_objective.text,
                        "target_location": agent.current_objective.target_location,
                        "set_at": (
                            None
                            if agent.current_objective.set_at is None
                            else _enc_dt(agent.current_objective.set_at)
                        ),
                    }
                ),
                "mutation_count": agent.mutation_count,
                "memory": {
                    "last_reflection_marker": agent.memory.last_reflection_marker,
                    "records": [
                        {
                            "id": r.id,
                            "sim_time": _enc_dt(r.sim_time),
                            "kind": r.kind,
                            "text": r.text,
                            "poignancy": r.poignancy,
                        }
                        for r in agent.memory.records
                    ],
                },
            }
            for name, agent in world.agents.items()
        },
        "descriptive_entities": dict(world.descriptive_entities),
        "shifts": [
            {
                "index": s.index,
                "occurred_at_tick": s.occurred_at_tick,
                "from_date": _enc_dt(s.from_date),
                "to_date": _enc_dt(s.to_date),
                "shift_text": s.shift_text,
                "new_locations": [[name, desc] for name, desc in s.new_locations],
                "agent_rewrites": dict(s.agent_rewrites),
                "new_descriptive_entities": [[name, desc] for name, desc in s.new_descriptive_entities],
            }
            for s in world.shifts
        ],
        "rules": [[name, definition] for name, definition in world.rules.rules],
        "config": asdict(world.config),
    }


def world_from_dict(data: dict) -> WorldState:
    from datetime import timedelta

    clock_data = data["clock"]
    clock = SimClock(
        sim_time=_dec_dt(clock_data["sim_time"]),
        tick_index=clock_data["tick_index"],
        ticks_per_day=clock_data["ticks_per_day"],
        tick_duration=timedelta(minutes=clock_data["tick_duration_minutes"]),
        era_start_time=_dec_dt(clock_data["era_start_time"]),
        era_start_tick=clock_data["era_start_tick"],
    )
    world = WorldState(
        name=data["name"],
        clock=clock,
        environment=data["environment"],
        story_objective=data["story_objective"],
        rng_seed=data["rng_seed"],
        rules=GoverningRules(rules=[(name, definition) for name, definition in data["rules"]]),
        config=EngineConfig(**data["config"]),
    )
    for name in sorted(data["locations"]):
        loc = data["locations"][name]
        world.locations[name] = Location(
            name=name,
            description_history=_dec_history(loc["description_history"]),
            created_at=_dec_dt(loc["created_at"]),
            created_by=loc["created_by"],
        )
    for name in sorted(data["agents"]):
        raw = data["agents"][name]
        objective = None
        if raw["current_objective"] is not None:
            obj = raw["current_objective"]
            objective = Objective(
                actor=obj["actor"],
                text=obj["text"],
                target_location=obj["target_location"],
                set_at=None if obj["set_at"] is None else _dec_dt(obj["set_at"]),
            )
        world.agents[name] = AgentProfile(
            name=name,
            description_history=_dec_history(raw["description_history"]),
            current_location=raw["current_location"],
            current_objective=objective,
            mutation_count=raw["mutation_count"],
            memory=MemoryStream(
                records=[
                    MemoryRecord(
                        id=r["id"],
                        sim_time=_dec_dt(r["sim_time"]),
                        kind=r["kind"],
                        text=r["text"],
                        poignancy=r["poignancy"],
                    )
                    for r in raw["memory"]["records"]
                ],
                last_reflection_marker=raw["memory"]["last_reflection_marker"],
            ),
        )
    world.descriptive_entities.update(data["descriptive_entities"])
    for s in data["shifts"]:
        world.shifts.append(
            NarrativeShift(
                index=s["index"],
                occurred_at_tick=s["occurred_at_tick"],
                from_date=_dec_dt(s["from_date"]),
                to_date=_dec_dt(s["to_date"]),
                shift_text=s["shift_text"],
                new_locations=[(name, desc) for name, desc in s["new_locations"]],
                agent_rewrites=dict(s["agent_rewrites"]),
                new_descriptive_entities=[(name, desc) for name, desc in s["new_descriptive_entities"]],
            )
        )
    return world


def snapshot_bytes(world: WorldState) -> bytes:
    payload = {"format_version": FORMAT_VERSION, "world": world_to_dict(world)}
    return (json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def save_snapshot(world: WorldState, path: str | Path) -> None:
    """Atomic snapshot write: temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(snapshot_bytes(world))
    os.replace(tmp, path)


def load_snapshot(path: str | Path) -> WorldState:
    path = Path(path)
    payload = json.loads(path.read_text(encoding="utf-8"))
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise SnapshotVersionError(f"{path}: unknown snapshot format_version {version!r}")
    try:
        world = world_from_dict(payload["world"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptSnapshotError([f"{path}: undecodable snapshot ({exc})"]) from exc
    violations = validate_world(world)
    if violations:
        raise CorruptSnapshotError(violations)
    return world


# ---------------------------------------------------------------------------
# prompt audit log
# ---------------------------------------------------------------------------


@dataclass
class AuditEntry:
    direction: str  # REQ | RSP
    kind: str
    payload: dict


class AuditWriter:
    """Appends length-prefixed UTF-8 JSON records, one per REQ/RSP."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = open(self.path, "ab")

    def record(self, direction: str, kind: str, payload: dict) -> None:
        data = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
        self._handle.write(f"{direction} {kind} {len(data)}\n".encode("utf-8"))
        self._handle.write(data)
        self._handle.write(b"\n")
        self._handle.flush()

    def close(self) -> None:
        self._handle.close()


def read_audit(path: str | Path) -> list[AuditEntry]:
    entries: list[AuditEntry] = []
    raw = Path(path).read_bytes()
    offset = 0
    while offset < len(raw):
        newline = raw.index(b"\n", offset)
        direction, kind, length = raw[offset:newline].decode("utf-8").split(" ")
        start = newline + 1
        end = start + int(length)
        entries.append(
            AuditEntry(
                direction=direction,
                kind=kind,
                payload=json.loads(raw[start:end].decode("utf-8")),
            )
        )
        offset = end + 1  # trailing newline
    return entries


class AuditingNarrator:
    """Decorator logging every exchange verbatim to the audit file."""

    def __init__(self, inner: Narrator, writer: AuditWriter) -> None:
        self.inner = inner
        self.writer = writer

    def complete(self, request: NarratorRequest) -> NarratorResponse:
        self.writer.record(
            "REQ",
            request.kind,
            {
                "kind": request.kind,
                "system_context": request.system_context,
                "user_context": request.user_context,
                "max_reply_tokens": request.max_reply_tokens,
            },
        )
        response = self.inner.complete(request)
        self.writer.record(
            "RSP",
            request.kind,
            {"text": response.text, "backend_id": response.backend_id, "latency_ms": response.latency_ms},
        )
        return response


class ReplayMismatchError(NarratorError):
    """A replayed request diverged from the recorded one."""


class ReplayExhaustedError(NarratorError):
    """The audit log ran out of recorded exchanges."""


class ReplayNarrator:
    """Serves recorded responses in order, verifying each request matches."""

    def __init__(self, entries: list[AuditEntry]) -> None:
        self._pairs: list[tuple[dict, dict]] = []
        pending: dict | None = None
        for entry in entries:
            if entry.direction == "REQ":
                pending = entry.payload
            elif entry.direction == "RSP" and pending is not None:
                self._pairs.append((pending, entry.payload))
                pending = None
        self._cursor = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayNarrator":
        return cls(read_audit(path))

    def remaining(self) -> int:
        return len(self._pairs) - self._cursor

    def complete(self, request: NarratorRequest) -> NarratorResponse:
        if self._cursor >= len(self._pairs):
            raise ReplayExhaustedError("audit log exhausted")
        recorded_request, recorded_response = self._pairs[self._cursor]
        for field_name, actual in (
            ("kind", request.kind),
            ("system_context", request.system_context),
            ("user_context", request.user_context),
        ):
            if recorded_request[field_name] != actual:
                raise ReplayMismatchError(
                    f"exchange {self._cursor}: {field_name} diverged from the recorded request"
                )
        self._cursor += 1
        return NarratorResponse(
            text=recorded_response["text"],
            backend_id=recorded_response.get("backend_id", "replay"),
            latency_ms=recorded_response.get("latency_ms", 0),
        )


# ---------------------------------------------------------------------------
# run archive and dataset export
# ---------------------------------------------------------------------------


@dataclass
class TranscriptRecord:
    kind: str  # agent | human
    participants: list[str]
    sim_date: str
    turns: list[tuple[str, str]]


@dataclass
class RunArchive:
    """Everything a run accumulates beyond the world itself: transcripts,
    summary regenerations and dialogue conclusions."""

    transcripts: list[TranscriptRecord] = field(default_factory=list)
    summaries: list[str] = field(default_factory=list)
    conclusions: list[tuple[str, str]] = field(default_factory=list)


def _join_records(blocks: list[str]) -> str:
    return DATASET_SEPARATOR.join(blocks) + ("\n" if blocks else "")


def export_datasets(
    world: WorldState,
    archive: RunArchive,
    log_path: str | Path | None,
    out_dir: str | Path,
) -> list[Path]:
    """Write the four analysis datasets.

    1. dialogue transcripts, 2. summary regenerations, 3. dialogue
    conclusions, 4. the full simulation text log (byte-equal copy). Missing
    inputs produce empty files plus a manifest noting the gaps.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gaps: list[str] = []

    blocks = []
    for i, record in enumerate(archive.transcripts, start=1):
        header = f"Dialogue {i} [{record.kind}]: {' & '.join(record.participants)} ({record.sim_date})"
        lines = [header] + [f'- {speaker} said "{text}"' for speaker, text in record.turns]
        blocks.append("\n".join(lines))
    dataset1 = out_dir / "dataset1.txt"
    dataset1.write_text(_join_records(blocks), encoding="utf-8", newline="\n")

    dataset2 = out_dir / "dataset2.txt"
    dataset2.write_text(_join_records(list(archive.summaries)), encoding="utf-8", newline="\n")

    dataset3 = out_dir / "dataset3.txt"
    dataset3.write_text(
        _join_records([f"{agent}: {text}" for agent, text in archive.conclusions]),
        encoding="utf-8",
        newline="\n",
    )

    dataset4 = out_dir / "dataset4.txt"
    if log_path is not None and Path(log_path).exists():
        dataset4.write_bytes(Path(log_path).read_bytes())
    else:
        dataset4.write_bytes(b"")
        gaps.append("dataset4: simulation log missing")

    written = [dataset1, dataset2, dataset3, dataset4]
    if gaps:
        manifest = out_dir / "manifest.txt"
        manifest.write_text("\n".join(gaps) + "\n", encoding="utf-8", newline="\n")
        written.append(manifest)
    return written
