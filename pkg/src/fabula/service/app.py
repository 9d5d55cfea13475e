"""HTTP facade over a running simulation.

Every route body executes as one command on a single-worker queue, so
mutations are serialized exactly like the engine's own writer: two
simultaneous step requests can never interleave tick internals, and a tick
slots cleanly between two dialogue turns. GETs go through the same queue
purely to get consistent reads; they mutate nothing.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Callable, TypeVar

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from fabula.dialogue import DialogueSession, SessionNotFoundError, SessionStateError
from fabula.model import project_summary
from fabula.narrator import NarratorUnavailableError
from fabula.runner import SimulationRunner
from fabula.service.schemas import (
    AgentInfo,
    ConcludeResponse,
    HealthResponse,
    LogResponse,
    OpenDialogueRequest,
    OpenDialogueResponse,
    PostMessageRequest,
    PostMessageResponse,
    StepRequest,
    StepResponse,
    SummaryResponse,
)

T = TypeVar("T")


class EngineQueue:
    """Single-worker command queue: submission order is application order."""

    def __init__(self) -> None:
        self._executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix="engine")

    def run(self, command: Callable[[], T]) -> T:
        return self._executor.submit(command).result()

    def shutdown(self) -> None:
        self._executor.shutdown(wait=True)


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "message": message})


def create_app(runner: SimulationRunner, ui_dir: str | Path | None = None) -> FastAPI:
    queue = EngineQueue()
    sessions: dict[str, DialogueSession] = {}

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        # graceful shutdown persists the world
        if runner.paths is not None:
            queue.run(runner.save)
        queue.shutdown()
        runner.close()

    app = FastAPI(title="fabula", lifespan=lifespan)

    @app.exception_handler(SessionNotFoundError)
    async def _not_found(request: Request, exc: SessionNotFoundError):
        return _error(404, "not-found", str(exc))

    @app.exception_handler(SessionStateError)
    async def _conflict(request: Request, exc: SessionStateError):
        return _error(409, "session-concluded", str(exc))

    @app.exception_handler(NarratorUnavailableError)
    async def _unavailable(request: Request, exc: NarratorUnavailableError):
        return _error(503, "narrator-unavailable", str(exc))

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse()

    @app.get("/summary", response_model=SummaryResponse)
    def summary() -> SummaryResponse:
        return queue.run(lambda: SummaryResponse.from_summary(project_summary(runner.world)))

    @app.get("/agents", response_model=list[AgentInfo])
    def agents() -> list[AgentInfo]:
        def read() -> list[AgentInfo]:
            return [
                AgentInfo(
                    name=name,
                    location=agent.current_location,
                    description=agent.description,
                    mutation_count=agent.mutation_count,
                )
                for name, agent in sorted(runner.world.agents.items())
            ]

        return queue.run(read)

    @app.post("/dialogues", response_model=OpenDialogueResponse, status_code=201)
    def open_dialogue(body: OpenDialogueRequest) -> OpenDialogueResponse:
        def command() -> OpenDialogueResponse:
            session = runner.open_dialogue(body.agent, human_label=body.human)
            sessions[session.id] = session
            return OpenDialogueResponse(session_id=session.id)

        return queue.run(command)

    def _session(session_id: str) -> DialogueSession:
        session = sessions.get(session_id)
        if session is None:
            raise SessionNotFoundError(f"unknown session '{session_id}'")
        return session

    @app.post("/dialogues/{session_id}/messages", response_model=PostMessageResponse)
    def post_message(session_id: str, body: PostMessageRequest):
        if not body.text or not body.text.strip():
            return _error(422, "validation", "text must be non-empty")

        def command() -> PostMessageResponse:
            session = _session(session_id)
            reply = runner.post_dialogue_message(session, body.text)
            return PostMessageResponse(reply=reply)

        return queue.run(command)

    @app.post("/dialogues/{session_id}/conclude", response_model=ConcludeResponse)
    def conclude(session_id: str) -> ConcludeResponse:
        def command() -> ConcludeResponse:
            session = _session(session_id)
            memory_ids = runner.conclude_dialogue(session)
            return ConcludeResponse(memory_ids=memory_ids)

        return queue.run(command)

    @app.post("/control/step", response_model=StepResponse)
    def step(body: StepRequest) -> StepResponse:
        return queue.run(lambda: StepResponse.from_reports(runner.step(body.ticks)))

    @app.get("/log", response_model=LogResponse)
    def tail_log(since: int = 0) -> LogResponse:
        def read() -> LogResponse:
            lines, cursor = runner.event_log.tail(since)
            return LogResponse(lines=lines, next=cursor)

        return queue.run(read)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
