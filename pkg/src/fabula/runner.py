"""Run orchestration: one world, one narrator, one set of sinks.

The runner owns the things a live simulation accumulates around the world
value itself: the text log, the prompt audit log and the run archive that
feeds the dataset export. The CLI drives it directly; the HTTP service
drives it through its command queue.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from fabula import dialogue as dialogue_ops
from fabula import engine as engine_ops
from fabula.engine import TickReport, format_summary_text
from fabula.model import WorldState, format_sim_date, project_summary
from fabula.narrator import Narrator
from fabula.persistence import (
    AUDIT_FILENAME,
    DATASET_DIRNAME,
    LOG_FILENAME,
    SNAPSHOT_FILENAME,
    AuditingNarrator,
    AuditWriter,
    EventLog,
    FixedStepClock,
    RunArchive,
    TranscriptRecord,
    WallClock,
    export_datasets,
    load_snapshot,
    save_snapshot,
)
from fabula.worldseed import DEFAULT_HUMAN_LABEL, InitSpec


@dataclass
class RunPaths:
    run_dir: Path

    @property
    def snapshot(self) -> Path:
        return self.run_dir / SNAPSHOT_FILENAME

    @property
    def log(self) -> Path:
        return self.run_dir / LOG_FILENAME

    @property
    def audit(self) -> Path:
        return self.run_dir / AUDIT_FILENAME

    @property
    def datasets(self) -> Path:
        return self.run_dir / DATASET_DIRNAME


class SimulationRunner:
    """Owns a world plus its sinks and applies engine operations to it."""

    def __init__(
        self,
        world: WorldState,
        narrator: Narrator,
        run_dir: str | Path | None = None,
        deterministic_time: bool = False,
        human_label: str = DEFAULT_HUMAN_LABEL,
    ) -> None:
        self.world = world
        self.human_label = human_label
        self.paths = RunPaths(Path(run_dir)) if run_dir is not None else None
        time_source = FixedStepClock() if deterministic_time else WallClock()
        self.event_log = EventLog(
            path=self.paths.log if self.paths is not None else None,
            time_source=time_source,
        )
        self._audit_writer = AuditWriter(self.paths.audit) if self.paths is not None else None
        self.narrator: Narrator = (
            AuditingNarrator(narrator, self._audit_writer) if self._audit_writer is not None else narrator
        )
        self.archive = RunArchive()

    # -- construction ------------------------------------------------------

    @classmethod
    def fresh(
        cls,
        spec: InitSpec,
        seed: int,
        narrator: Narrator,
        run_dir: str | Path | None = None,
        deterministic_time: bool = False,
    ) -> "SimulationRunner":
        world = engine_ops.init_world(spec, seed)
        runner = cls(
            world,
            narrator,
            run_dir=run_dir,
            deterministic_time=deterministic_time,
            human_label=spec.human_label,
        )
        runner.log_events(engine_ops.init_events(world, from_disk=False))
        return runner

    @classmethod
    def from_snapshot(
        cls,
        snapshot_path: str | Path,
        narrator: Narrator,
        run_dir: str | Path | None = None,
        deterministic_time: bool = False,
        human_label: str = DEFAULT_HUMAN_LABEL,
    ) -> "SimulationRunner":
        world = load_snapshot(snapshot_path)
        runner = cls(
            world,
            narrator,
            run_dir=run_dir,
            deterministic_time=deterministic_time,
            human_label=human_label,
        )
        runner.log_events(engine_ops.init_events(world, from_disk=True))
        return runner

    # -- logging and archiving ---------------------------------------------

    def log_events(self, events: list[str]) -> None:
        for event in events:
            self.event_log.append(event)

    def _archive_report(self, report: TickReport) -> None:
        sim_date = format_sim_date(report.sim_time or self.world.clock.sim_time)
        for transcript in report.transcripts:
            self.archive.transcripts.append(
                TranscriptRecord(
                    kind="agent",
                    participants=list(transcript.participants),
                    sim_date=sim_date,
                    turns=list(transcript.turns),
                )
            )
            for agent_name in transcript.participants:
                if agent_name in transcript.summaries:
                    self.archive.conclusions.append((agent_name, transcript.summaries[agent_name]))
        for summary in report.summary_snapshots:
            self.archive.summaries.append(format_summary_text(summary))

    # -- stepping ------------------------------------------------------------

    def step(self, n_ticks: int = 1, pace_ms: int | None = None) -> list[TickReport]:
        """Run ``n_ticks`` ticks, logging and archiving as they complete."""
        if n_ticks < 1:
            raise ValueError("n_ticks must be >= 1")
        pacing = self.world.config.real_time_pacing_ms if pace_ms is None else pace_ms
        reports: list[TickReport] = []
        for i in range(n_ticks):
            world, report = engine_ops.step_tick(self.world, self.narrator)
            self.world = world
            self.log_events(report.events)
            self._archive_report(report)
            reports.append(report)
            if pacing and i + 1 < n_ticks:
                time.sleep(pacing / 1000.0)
        return reports

    # -- human dialogue -------------------------------------------------------

    def open_dialogue(self, agent_name: str, human_label: str | None = None) -> dialogue_ops.DialogueSession:
        session, events = dialogue_ops.open_session(
            self.world, agent_name, human_label=human_label or self.human_label
        )
        self.log_events(events)
        return session

    def post_dialogue_message(self, session: dialogue_ops.DialogueSession, text: str) -> str:
        reply, events = dialogue_ops.post_message(session, text, self.world, self.narrator)
        self.log_events(events)
        return reply

    def conclude_dialogue(self, session: dialogue_ops.DialogueSession) -> list[int]:
        memory_ids, events = dialogue_ops.conclude_session(session, self.world, self.narrator)
        self.log_events(events)
        self.archive.transcripts.append(
            TranscriptRecord(
                kind="human",
                participants=[session.human_label, session.agent_name],
                sim_date=format_sim_date(self.world.clock.sim_time),
                turns=[(t.speaker, t.text) for t in session.transcript],
            )
        )
        agent = self.world.agents[session.agent_name]
        for record in agent.memory.records:
            if record.id in memory_ids:
                self.archive.conclusions.append((session.agent_name, record.text))
        self.archive.summaries.append(format_summary_text(project_summary(self.world)))
        return memory_ids

    # -- persistence ----------------------------------------------------------

    def save(self, path: str | Path | None = None) -> Path:
        target = Path(path) if path is not None else (self.paths.snapshot if self.paths else None)
        if target is None:
            raise ValueError("no snapshot path configured")
        save_snapshot(self.world, target)
        return target

    def finalize(self) -> None:
        """Persist everything a completed run leaves behind."""
        if self.paths is None:
            return
        self.save()
        export_datasets(self.world, self.archive, self.paths.log, self.paths.datasets)
        self.close()

    def close(self) -> None:
        self.event_log.close()
        if self._audit_writer is not None:
            self._audit_writer.close()


def replay_run(
    snapshot_path: str | Path,
    audit_path: str | Path,
    run_dir: str | Path | None = None,
) -> list[str]:
    """Re-run a recorded simulation from its initial snapshot and audit log.

    The audit log acts as the event source: each engine request must match
    the recorded one and receives the recorded response. Returns the
    regenerated log lines, which for a deterministic run are byte-identical
    to the original ``simulation.log``.
    """
    from fabula.persistence import ReplayNarrator

    replay_narrator = ReplayNarrator.from_file(audit_path)
    runner = SimulationRunner.from_snapshot(
        snapshot_path,
        replay_narrator,
        run_dir=run_dir,
        deterministic_time=True,
    )
    while replay_narrator.remaining() > 0:
        runner.step(1)
    runner.close()
    return list(runner.event_log.lines)
