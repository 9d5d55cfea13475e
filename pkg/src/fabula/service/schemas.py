"""Request/response models for the HTTP facade."""

from __future__ import annotations

from pydantic import BaseModel, Field

from fabula.engine import TickReport
from fabula.model import NarrativeShift, SimulationSummary


class HealthResponse(BaseModel):
    status: str = "ok"


class SummaryResponse(BaseModel):
    simulation_time: str
    environment: str
    last_narrative_shift: str
    locations: list[tuple[str, str]]
    agent_locations: dict[str, str]
    character_descriptions: dict[str, str]

    @classmethod
    def from_summary(cls, summary: SimulationSummary) -> "SummaryResponse":
        return cls(
            simulation_time=summary.simulation_time,
            environment=summary.environment,
            last_narrative_shift=summary.last_narrative_shift,
            locations=summary.locations,
            agent_locations=summary.agent_locations,
            character_descriptions=summary.character_descriptions,
        )


class AgentInfo(BaseModel):
    name: str
    location: str
    description: str
    mutation_count: int


class OpenDialogueRequest(BaseModel):
    agent: str
    human: str | None = None


class OpenDialogueResponse(BaseModel):
    session_id: str


class PostMessageRequest(BaseModel):
    text: str


class PostMessageResponse(BaseModel):
    reply: str


class ConcludeResponse(BaseModel):
    memory_ids: list[int]


class StepRequest(BaseModel):
    ticks: int = Field(default=1, ge=1)


class ShiftInfo(BaseModel):
    index: int
    occurred_at_tick: int
    from_date: str
    to_date: str
    shift_text: str
    new_locations: list[tuple[str, str]]
    agent_rewrites: dict[str, str]
    new_descriptive_entities: list[tuple[str, str]]

    @classmethod
    def from_shift(cls, shift: NarrativeShift) -> "ShiftInfo":
        return cls(
            index=shift.index,
            occurred_at_tick=shift.occurred_at_tick,
            from_date=shift.from_date.strftime("%Y-%m-%dT%H:%M"),
            to_date=shift.to_date.strftime("%Y-%m-%dT%H:%M"),
            shift_text=shift.shift_text,
            new_locations=shift.new_locations,
            agent_rewrites=shift.agent_rewrites,
            new_descriptive_entities=shift.new_descriptive_entities,
        )


class StepResponse(BaseModel):
    """TickReport over the wire; multi-tick steps aggregate their reports."""

    tick_index: int
    events: list[str]
    narrator_calls: int
    shift: ShiftInfo | None = None

    @classmethod
    def from_reports(cls, reports: list[TickReport]) -> "StepResponse":
        last_shift = next((r.shift for r in reversed(reports) if r.shift is not None), None)
        return cls(
            tick_index=reports[-1].tick_index,
            events=[event for report in reports for event in report.events],
            narrator_calls=sum(r.narrator_calls for r in reports),
            shift=ShiftInfo.from_shift(last_shift) if last_shift is not None else None,
        )


class LogResponse(BaseModel):
    lines: list[str]
    next: int


class ErrorBody(BaseModel):
    error: str
    message: str
