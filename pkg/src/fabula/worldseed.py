"""Initial world specifications.

An :class:`InitSpec` is everything needed to bootstrap a world: start date,
environment paragraph, story objective, seed locations, seed agents and the
governing rules. Specs load from JSON files or fall back to the built-in
default world, Gracia, with its two contrasting inhabitants.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields as dataclass_fields
from datetime import datetime
from pathlib import Path

from fabula.model import EngineConfig, GoverningRules, SimClock

DEFAULT_HUMAN_LABEL = "Grace"


@dataclass
class AgentSeed:
    name: str
    description: str
    location: str


@dataclass
class InitSpec:
    name: str
    start_time: datetime
    environment: str
    story_objective: str
    locations: list[tuple[str, str]] = field(default_factory=list)
    agents: list[AgentSeed] = field(default_factory=list)
    descriptive_entities: dict[str, str] = field(default_factory=dict)
    rules: list[tuple[str, str]] = field(default_factory=list)
    human_label: str = DEFAULT_HUMAN_LABEL
    config: EngineConfig = field(default_factory=EngineConfig)

    def make_clock(self) -> SimClock:
        return SimClock(sim_time=self.start_time)

    def make_rules(self) -> GoverningRules:
        return GoverningRules(rules=list(self.rules))

    @classmethod
    def from_dict(cls, data: dict) -> "InitSpec":
        config_overrides = data.get("config", {})
        known = {f.name for f in dataclass_fields(EngineConfig)}
        unknown = set(config_overrides) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(
            name=data["name"],
            start_time=datetime.fromisoformat(data["start_time"]),
            environment=data["environment"],
            story_objective=data["story_objective"],
            locations=[(loc["name"], loc["description"]) for loc in data.get("locations", [])],
            agents=[
                AgentSeed(name=a["name"], description=a["description"], location=a["location"])
                for a in data.get("agents", [])
            ],
            descriptive_entities=dict(data.get("descriptive_entities", {})),
            rules=[(r["name"], r["definition"]) for r in data.get("rules", [])],
            human_label=data.get("human_label", DEFAULT_HUMAN_LABEL),
            config=EngineConfig(**config_overrides),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "InitSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def default_init_spec() -> InitSpec:
    """The built-in world: Gracia, with Lex and Tortugi at the Oasis."""
    return InitSpec(
        name="Gracia",
        start_time=datetime(2027, 5, 18, 21, 0),
        environment=(
            "Gracia is a wild, undisciplined, and unpredictable self-regulating space "
            "that enables agents to explore uncharted territories of personal "
            "experiences, visions, and dreams. The Oasis stands out as a lush and "
            "fertile area, surrounded by shapeshifting dunes that provide a stark "
            "contrast to the barren desert."
        ),
        story_objective="To explore, interact, and discover all the secrets of Gracia.",
        locations=[
            ("Oasis", "A fertile area in a desert containing water and vegetation."),
            ("Shapeshifting Dunes", "Restless dunes that wander the desert, never the same shape twice."),
            ("Coconut Grove", "Coconut trees that provide food and raw material for creating places and things."),
        ],
        agents=[
            AgentSeed(
                name="Lex",
                description=(
                    "Air and ground-based creature who desires freedom. A fearless "
                    "creature, bold and solitary. Lex can see clearly into far-off "
                    "distances. Lex prefers movement and changes over being settled in "
                    "one place. Lex is destructive and deviant, a calculated risk-taker."
                ),
                location="Oasis",
            ),
            AgentSeed(
                name="Tortugi",
                description=(
                    "Ground and water-based creature who desires connection. An "
                    "altruistic creature, humble and grounded through relations. "
                    "Tortugi can be present and take action to build the future they "
                    "want. Tortugi seeks stillness, and security, to settle in one "
                    "place. Tortugi is considered a creator."
                ),
                location="Oasis",
            ),
        ],
        rules=[
            (
                "Cooperation",
                "Tortugi will mostly try to cooperate with Lex, in their attempt to "
                "re-make Gracia, regardless of benefit or cost. Lex will resist "
                "cooperating with Tortugi unless they stand to benefit from the cooperation.",
            ),
            (
                "Resource-sharing",
                "Tortugi prioritizes resource sharing and cooperation with Lex to "
                "reshape their shared home, while Lex focuses on accumulating "
                "resources for individual goals and minimizing interference.",
            ),
            (
                "Hybridisation",
                "Tortugi, Lex and Gracia itself have the ability to hybridise and "
                "mutate alongside each other and environments through their "
                "interactions and co-performativity.",
            ),
            (
                "Liberation",
                "Tortugi, Lex and Gracia itself want to be liberated from what is, to "
                "become un-done and re-made into what could be. Their survival and "
                "potential for liberation is entangled through their relations.",
            ),
        ],
    )
