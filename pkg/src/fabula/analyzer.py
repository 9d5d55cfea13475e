"""Post-hoc corpus analysis of run artifacts.

Term and phrase frequency over the text log and datasets, plus timelines
of where locations came from and how agents mutated. Pure functions over
immutable inputs; the CLI wraps them into a report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from fabula.model import INIT_CREATOR, WorldState


def _normalize(text: str) -> str:
    return " ".join(text.split())


def count_phrase(corpus: str, phrase: str) -> int:
    """Case-insensitive count of non-overlapping occurrences, after
    collapsing all whitespace runs to single spaces."""
    if not phrase:
        raise ValueError("phrase must be non-empty")
    haystack = _normalize(corpus).casefold()
    needle = _normalize(phrase).casefold()
    if not needle:
        raise ValueError("phrase must contain non-whitespace characters")
    return haystack.count(needle)


def word_count(corpus: str) -> int:
    """Number of maximal non-whitespace runs."""
    return len(corpus.split())


@dataclass
class TimelineEntry:
    sim_time: datetime
    name: str
    detail: str


def location_timeline(world: WorldState) -> list[TimelineEntry]:
    """Locations beyond the initial spec, in creation order."""
    created = [loc for loc in world.locations.values() if loc.created_by != INIT_CREATOR]
    created.sort(key=lambda loc: (loc.created_at, loc.name))
    return [TimelineEntry(sim_time=loc.created_at, name=loc.name, detail=loc.created_by) for loc in created]


def mutation_timeline(world: WorldState) -> list[TimelineEntry]:
    """Every description rewrite across all agents, merged chronologically."""
    entries: list[TimelineEntry] = []
    for name in sorted(world.agents):
        agent = world.agents[name]
        for moment, description in agent.description_history[1:]:
            excerpt = description if len(description) <= 80 else description[:77] + "..."
            entries.append(TimelineEntry(sim_time=moment, name=name, detail=excerpt))
    entries.sort(key=lambda e: (e.sim_time, e.name))
    return entries


def analyze_run(
    world: WorldState,
    log_text: str,
    phrases: list[str] | None = None,
) -> dict:
    """Machine-readable analysis of one run."""
    locations = location_timeline(world)
    mutations = mutation_timeline(world)
    return {
        "log_word_count": word_count(log_text),
        "phrase_counts": {phrase: count_phrase(log_text, phrase) for phrase in (phrases or [])},
        "locations_created": len(locations),
        "location_timeline": [
            {"sim_time": e.sim_time.strftime("%Y-%m-%dT%H:%M"), "name": e.name, "created_by": e.detail}
            for e in locations
        ],
        "mutation_count": len(mutations),
        "mutation_timeline": [
            {"sim_time": e.sim_time.strftime("%Y-%m-%dT%H:%M"), "agent": e.name, "description": e.detail}
            for e in mutations
        ],
        "narrative_shifts": len(world.shifts),
    }


def render_report(analysis: dict) -> str:
    lines = [
        "Run analysis",
        "============",
        f"log words: {analysis['log_word_count']}",
        f"narrative shifts: {analysis['narrative_shifts']}",
        f"locations created: {analysis['locations_created']}",
        f"mutations: {analysis['mutation_count']}",
    ]
    if analysis["phrase_counts"]:
        lines.append("phrase counts:")
        for phrase, count in analysis["phrase_counts"].items():
            lines.append(f'  "{phrase}": {count}')
    if analysis["location_timeline"]:
        lines.append("location timeline:")
        for entry in analysis["location_timeline"]:
            lines.append(f"  {entry['sim_time']}  {entry['name']}  (by {entry['created_by']})")
    if analysis["mutation_timeline"]:
        lines.append("mutation timeline:")
        for entry in analysis["mutation_timeline"]:
            lines.append(f"  {entry['sim_time']}  {entry['agent']}: {entry['description']}")
    return "\n".join(lines) + "\n"


def write_analysis(analysis: dict, out_dir: str | Path) -> tuple[Path, Path]:
    """Emit the plain-text report and the machine-readable counts file."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.txt"
    counts_path = out_dir / "counts.json"
    report_path.write_text(render_report(analysis), encoding="utf-8", newline="\n")
    counts_path.write_text(
        json.dumps(analysis, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
        newline="\n",
    )
    return report_path, counts_path
