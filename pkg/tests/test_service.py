from __future__ import annotations

import threading

import pytest
from fastapi.testclient import TestClient

from fabula.engine import init_world
from fabula.narrator import NarratorUnavailableError
from fabula.narrator.scripted import ScriptedNarrator, default_ruleset
from fabula.persistence import save_snapshot
from fabula.runner import SimulationRunner
from fabula.service import create_app


class OutageSwitch:
    """Wraps a narrator with a kill switch for 503 testing."""

    def __init__(self, inner):
        self.inner = inner
        self.down = False

    def complete(self, request):
        if self.down:
            raise NarratorUnavailableError("backend offline")
        return self.inner.complete(request)


@pytest.fixture
def service(tmp_path, gracia_spec):
    narrator = OutageSwitch(ScriptedNarrator(default_ruleset()))
    world = init_world(gracia_spec, 7)
    snapshot_path = tmp_path / "w.json"
    save_snapshot(world, snapshot_path)
    runner = SimulationRunner.from_snapshot(snapshot_path, narrator, run_dir=tmp_path / "run")
    app = create_app(runner)
    with TestClient(app) as client:
        yield client, runner, narrator


class TestRouteTable:
    def test_health(self, service):
        client, _, _ = service
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok"}

    def test_summary_has_all_six_sections(self, service):
        client, _, _ = service
        body = client.get("/summary").json()
        assert set(body) == {
            "simulation_time",
            "environment",
            "last_narrative_shift",
            "locations",
            "agent_locations",
            "character_descriptions",
        }
        assert body["simulation_time"] == "May 18, 2027, 21:00"
        assert body["agent_locations"] == {"Lex": "Oasis", "Tortugi": "Oasis"}
        assert body["last_narrative_shift"] == body["environment"]

    def test_agents_listing(self, service):
        client, _, _ = service
        body = client.get("/agents").json()
        assert [a["name"] for a in body] == ["Lex", "Tortugi"]
        assert all(a["location"] == "Oasis" and a["mutation_count"] == 0 for a in body)
        assert body[0]["description"].startswith("Air and ground-based creature")

    def test_dialogue_lifecycle(self, service):
        client, runner, _ = service
        opened = client.post("/dialogues", json={"agent": "Lex"})
        assert opened.status_code == 201
        session_id = opened.json()["session_id"]

        reply = client.post(f"/dialogues/{session_id}/messages", json={"text": "hello there"})
        assert reply.status_code == 200
        assert reply.json()["reply"]

        concluded = client.post(f"/dialogues/{session_id}/conclude", json={})
        assert concluded.status_code == 200
        memory_ids = concluded.json()["memory_ids"]
        assert len(memory_ids) == 1
        assert runner.world.agents["Lex"].memory.records[-1].id == memory_ids[0]

        again = client.post(f"/dialogues/{session_id}/conclude", json={})
        assert again.status_code == 409
        assert again.json()["error"] == "session-concluded"

    def test_unknown_agent_404(self, service):
        client, _, _ = service
        response = client.post("/dialogues", json={"agent": "Luna"})
        assert response.status_code == 404
        body = response.json()
        assert body["error"] == "not-found" and "Luna" in body["message"]

    def test_unknown_session_404(self, service):
        client, _, _ = service
        response = client.post("/dialogues/absent/messages", json={"text": "hi"})
        assert response.status_code == 404

    def test_empty_message_422(self, service):
        client, _, _ = service
        opened = client.post("/dialogues", json={"agent": "Lex"})
        session_id = opened.json()["session_id"]
        response = client.post(f"/dialogues/{session_id}/messages", json={"text": "   "})
        assert response.status_code == 422
        assert response.json()["error"] == "validation"

    def test_step_twelve_ticks_reports_one_shift(self, service):
        client, runner, _ = service
        response = client.post("/control/step", json={"ticks": 12})
        assert response.status_code == 200
        body = response.json()
        assert body["narrator_calls"] > 0
        assert body["shift"] is not None
        assert body["shift"]["index"] == 1
        assert runner.world.clock.tick_index == 12
        assert any(event.startswith("objective:") for event in body["events"])

    def test_log_tailing_with_monotone_cursor(self, service):
        client, _, _ = service
        first = client.get("/log", params={"since": 0}).json()
        assert first["lines"][0].endswith("Initialising Gracia.")
        assert first["next"] == len(first["lines"])
        again = client.get("/log", params={"since": first["next"]}).json()
        assert again["lines"] == [] and again["next"] == first["next"]
        client.post("/control/step", json={"ticks": 1})
        after = client.get("/log", params={"since": first["next"]}).json()
        assert after["next"] > first["next"]
        assert any(event.startswith("2") for event in after["lines"])  # timestamped

    def test_narrator_outage_maps_to_503(self, service):
        client, _, narrator = service
        opened = client.post("/dialogues", json={"agent": "Lex"})
        session_id = opened.json()["session_id"]
        narrator.down = True
        response = client.post(f"/dialogues/{session_id}/messages", json={"text": "anyone there?"})
        assert response.status_code == 503
        assert response.json()["error"] == "narrator-unavailable"
        narrator.down = False
        retry = client.post(f"/dialogues/{session_id}/messages", json={"text": "anyone there?"})
        assert retry.status_code == 200


class TestServiceSemantics:
    def test_gets_are_side_effect_free(self, service):
        client, runner, _ = service
        before = client.get("/summary").json()
        for _ in range(3):
            client.get("/summary")
            client.get("/agents")
            client.get("/log")
        assert client.get("/summary").json() == before
        assert runner.world.clock.tick_index == 0

    def test_concurrent_steps_serialize_cleanly(self, service):
        client, runner, _ = service
        errors = []

        def hammer():
            try:
                response = client.post("/control/step", json={"ticks": 3})
                assert response.status_code == 200
            except Exception as exc:  # noqa: BLE001
                errors.append(exc)

        threads = [threading.Thread(target=hammer) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert errors == []
        assert runner.world.clock.tick_index == 12
        assert len(runner.world.shifts) == 1

    def test_concurrent_posts_to_one_session_never_interleave(self, service):
        client, runner, _ = service
        session_id = client.post("/dialogues", json={"agent": "Lex"}).json()["session_id"]
        errors = []

        def post(text):
            try:
                assert client.post(f"/dialogues/{session_id}/messages", json={"text": text}).status_code == 200
            except Exception as exc:  # noqa: BLE001
                errors.append(exc)

        threads = [threading.Thread(target=post, args=(f"thought {i}",)) for i in range(5)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert errors == []
        concluded = client.post(f"/dialogues/{session_id}/conclude", json={})
        assert concluded.status_code == 200
        turns = runner.archive.transcripts[-1].turns
        speakers = [speaker for speaker, _ in turns]
        assert speakers == ["Grace", "Lex"] * 5  # strictly alternating, no interleaved replies

    def test_tick_between_dialogue_turns_keeps_transcript(self, service):
        client, runner, _ = service
        session_id = client.post("/dialogues", json={"agent": "Lex"}).json()["session_id"]
        client.post(f"/dialogues/{session_id}/messages", json={"text": "before"})
        client.post("/control/step", json={"ticks": 1})
        client.post(f"/dialogues/{session_id}/messages", json={"text": "after"})
        concluded = client.post(f"/dialogues/{session_id}/conclude", json={})
        assert concluded.status_code == 200

    def test_conclude_regenerates_summary_archive(self, service):
        client, runner, _ = service
        archived = len(runner.archive.summaries)
        session_id = client.post("/dialogues", json={"agent": "Lex"}).json()["session_id"]
        client.post(f"/dialogues/{session_id}/messages", json={"text": "hello"})
        client.post(f"/dialogues/{session_id}/conclude", json={})
        assert len(runner.archive.summaries) == archived + 1


def test_shutdown_persists_snapshot(tmp_path, gracia_spec):
    narrator = ScriptedNarrator(default_ruleset())
    world = init_world(gracia_spec, 7)
    snapshot_path = tmp_path / "w.json"
    save_snapshot(world, snapshot_path)
    run_dir = tmp_path / "run"
    runner = SimulationRunner.from_snapshot(snapshot_path, narrator, run_dir=run_dir)
    app = create_app(runner)
    with TestClient(app) as client:
        client.post("/control/step", json={"ticks": 2})
    saved = run_dir / "world.snapshot.json"
    assert saved.exists()
    from fabula.persistence import load_snapshot

    assert load_snapshot(saved).clock.tick_index == 2
