"""fabula: a human-in-the-loop generative-agent narrative sandbox.

A seeded world of language-model-driven agents that act, converse,
remember, reflect and mutate in two-hour ticks, with a narrative shift
propelling the world years ahead at each day boundary. A human operator
steers the run through dialogue, over HTTP or from the terminal.
"""

from fabula.model import (
    AgentProfile,
    EngineConfig,
    Location,
    MemoryRecord,
    MemoryStream,
    NarrativeShift,
    SimClock,
    SimulationSummary,
    WorldState,
    project_summary,
    validate_world,
)

__version__ = "0.1.0"

__all__ = [
    "AgentProfile",
    "EngineConfig",
    "Location",
    "MemoryRecord",
    "MemoryStream",
    "NarrativeShift",
    "SimClock",
    "SimulationSummary",
    "WorldState",
    "project_summary",
    "validate_world",
    "__version__",
]
