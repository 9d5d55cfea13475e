from __future__ import annotations

import random
from datetime import datetime, timedelta

import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.fspath.basename == "test_acceptance.py":
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        verdict = "PASS" if report.passed else "FAIL"
        capman = item.config.pluginmanager.getplugin("capturemanager")
        if capman is not None:
            with capman.global_and_fixture_disabled():
                print(f"ACCEPTANCE {verdict}: {doc}")
        else:
            print(f"ACCEPTANCE {verdict}: {doc}")

from fabula.engine import init_world
from fabula.model import (
    AgentProfile,
    EngineConfig,
    GoverningRules,
    Location,
    MemoryRecord,
    MemoryStream,
    NarrativeShift,
    SimClock,
    WorldState,
    add_years,
)
from fabula.narrator import NarratorRequest, NarratorResponse, RetryableNarratorError
from fabula.narrator.scripted import ScriptedNarrator, default_ruleset
from fabula.worldseed import default_init_spec


class StubNarrator:
    """Test double: serves canned replies, optionally failing first."""

    def __init__(self, replies=None, handler=None, fail_first=0, error=None):
        self.replies = list(replies or [])
        self.handler = handler
        self.fail_first = fail_first
        self.error = error or RetryableNarratorError("stubbed failure")
        self.requests: list[NarratorRequest] = []

    def complete(self, request: NarratorRequest) -> NarratorResponse:
        self.requests.append(request)
        if self.fail_first > 0:
            self.fail_first -= 1
            raise self.error
        if self.handler is not None:
            text = self.handler(request)
        elif self.replies:
            text = self.replies.pop(0)
        else:
            text = "5"
        return NarratorResponse(text=text, backend_id="stub", latency_ms=0)


class FixedRater:
    """Rater double emitting a fixed sequence of rating replies."""

    def __init__(self, values):
        self.values = list(values)

    def complete(self, request: NarratorRequest) -> NarratorResponse:
        assert request.kind == "rate-poignancy"
        return NarratorResponse(text=str(self.values.pop(0)), backend_id="fixed", latency_ms=0)


@pytest.fixture
def scripted():
    return ScriptedNarrator(default_ruleset())


@pytest.fixture
def gracia_spec():
    spec = default_init_spec()
    spec.config.shift_jitter_days = 0
    return spec


@pytest.fixture
def fresh_world(gracia_spec):
    return init_world(gracia_spec, 7)


_NAME_POOL = ["Oasis", "Dunes", "Grove", "Garden", "Bunker", "Spire", "Rift", "Harbor"]
_AGENT_POOL = ["Lex", "Tortugi", "Mira", "Sol", "Vex"]
_KINDS = ["observation", "action", "dialogue-summary", "reflection", "narrative"]


def build_random_world(rng: random.Random) -> WorldState:
    """A structurally valid world with randomized content, for round-trip
    and fuzz tests."""
    start = datetime(2027, rng.randint(1, 12), rng.randint(1, 28), rng.randint(0, 23), rng.choice([0, 15, 30]))
    ticks = rng.randint(0, 40)
    clock = SimClock(
        sim_time=start + timedelta(hours=2) * ticks,
        tick_index=ticks,
        era_start_time=start,
        era_start_tick=0,
    )
    config = EngineConfig(shift_jitter_days=rng.choice([0, 30, 90]))
    world = WorldState(
        name=rng.choice(["Gracia", "Thule", "Eden"]),
        clock=clock,
        environment="A randomized testing world of " + rng.choice(["sand", "water", "glass"]) + ".",
        story_objective="To probe the serializer.",
        rng_seed=rng.getrandbits(32),
        config=config,
    )
    n_locations = rng.randint(1, 4)
    for name in rng.sample(_NAME_POOL, n_locations):
        history = [(start, f"The {name} as first seen.")]
        for extra in range(rng.randint(0, 2)):
            history.append((start + timedelta(hours=2 * (extra + 1)), f"The {name}, rewritten {extra + 1}."))
        world.locations[name] = Location(
            name=name, description_history=history, created_at=start, created_by="init"
        )
    location_names = list(world.locations)
    for name in rng.sample(_AGENT_POOL, rng.randint(1, 3)):
        history = [(start, f"{name}, a seed description.")]
        for extra in range(rng.randint(0, 3)):
            history.append((start + timedelta(hours=2 * (extra + 1)), f"{name}, mutated {extra + 1} times."))
        records = []
        moment = start
        for record_id in range(1, rng.randint(0, 8) + 1):
            moment = moment + timedelta(hours=rng.randint(0, 4))
            records.append(
                MemoryRecord(
                    id=record_id,
                    sim_time=moment,
                    kind=rng.choice(_KINDS),
                    text=f"{name} memory {record_id} about {rng.choice(_NAME_POOL)}.",
                    poignancy=rng.randint(1, 10),
                )
            )
        marker = rng.choice([0] + [r.id for r in records]) if records else 0
        world.agents[name] = AgentProfile(
            name=name,
            description_history=history,
            current_location=rng.choice(location_names),
            memory=MemoryStream(records=records, last_reflection_marker=marker),
            mutation_count=len(history) - 1,
        )
    if rng.random() < 0.5:
        world.descriptive_entities["Luna"] = "A quiet gardener."
    from_date = start
    for index in range(1, rng.randint(0, 3) + 1):
        jitter = rng.randint(-config.shift_jitter_days, config.shift_jitter_days) if config.shift_jitter_days else 0
        to_date = add_years(from_date, 2) + timedelta(days=jitter)
        world.shifts.append(
            NarrativeShift(
                index=index,
                occurred_at_tick=index * 12,
                from_date=from_date,
                to_date=to_date,
                shift_text=f"Shift {index} reshaped the land.",
                new_locations=[("Spire", "A spire.")] if rng.random() < 0.3 else [],
                agent_rewrites={},
                new_descriptive_entities=[("Echo", "A voice.")] if rng.random() < 0.3 else [],
            )
        )
        from_date = to_date
    world.rules = GoverningRules(rules=[("Cooperation", "Agents cooperate."), ("Liberation", "Agents seek change.")])
    return world
