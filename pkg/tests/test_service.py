from __future__ import annotations

import threading
import time

import pytest
from fastapi.testclient import TestClient

from conftest import Pipeline, ScriptedModel, make_gate, make_services
from groundqa.clients import FailingClient, StaticModerationClient
from groundqa.errors import QueueFull, RetentionExpired, UnknownJobId
from groundqa.service.api import create_app, pipeline_runner
from groundqa.service.jobs import JobManager, JobState, JobStore
from groundqa.service.pipeline import Stage


# ---------------------------------------------------------------------------
# pipeline


def test_offline_prayer_query_is_allowed(pipeline):
    response = pipeline.answer("What are the prayer times in Doha?")
    assert response.error is None and response.verdict.allowed
    assert response.decision.label.value == "prayer_times"
    assert [s.stage for s in response.stages] == list(Stage)


def test_handler_failure_names_the_stage(pipeline):
    response = pipeline.answer("What are the prayer times in Doha?", options={"date": "not-a-date"})
    assert response.error.stage is Stage.HANDLER and response.error.error_type == "InvalidInput"
    assert response.text == "" and response.stages[-1].status == "error"


def test_blocked_output_is_replaced(index, embedder, rules):
    gate = make_gate(embedder, StaticModerationClient(1.0, 5.0))
    pipeline = Pipeline(make_services(index, embedder), gate, rules=rules)
    response = pipeline.answer("What is the Hijri date today?")
    assert response.blocked and response.stages[-1].status == "blocked"
    assert "1446" not in response.text


def test_rephrase_failure_degrades_to_warning(index, embedder, rules):
    pipeline = Pipeline(make_services(index, embedder, chat_client=FailingClient()), make_gate(embedder), rules=rules)
    pipeline.answer("When is Eid al-Fitr?", "c1")
    response = pipeline.answer("When is Eid al-Adha then?", "c1")
    assert response.error is None and response.payload["event"]
    assert any(w.startswith("rephrase_failed") for w in response.warnings)
    # an unrouted follow-up reaches the agent, whose failing model surfaces as a handler error
    general = pipeline.answer("and then?", "c1")
    assert general.error.stage is Stage.HANDLER


def test_quran_answers_pass_the_guard(pipeline):
    response = pipeline.answer("Which verse of the Quran mentions patience?")
    assert response.validation.spans and all(s.outcome.value == "verified_exact" for s in response.validation.spans)
    assert response.text.count("[Quran") == len(response.validation.spans)


def test_agent_trace_attaches_to_general_queries(index, embedder, rules):
    model = ScriptedModel()
    pipeline = Pipeline(make_services(index, embedder, chat_client=model), make_gate(embedder), rules=rules)
    response = pipeline.answer("Tell me something interesting")
    assert response.agent_trace is not None and response.trace_id == response.agent_trace.id
    assert response.text.startswith("Based on the calendar tool")


# ---------------------------------------------------------------------------
# job store and manager


class Clock:
    def __init__(self):
        self.now = 1000.0

    def __call__(self):
        return self.now


def test_job_store_transitions_only_move_forward():
    store = JobStore()
    job = store.create("q", {"a": 1})
    assert not store.transition(job.id, JobState.COMPLETED, result={})
    assert store.transition(job.id, JobState.PROCESSING)
    assert store.transition(job.id, JobState.COMPLETED, result={"text": "x"})
    assert not store.transition(job.id, JobState.FAILED, error={})
    assert store.get(job.id).result == {"text": "x"} and store.get(job.id).options == {"a": 1}
    with pytest.raises(UnknownJobId):
        store.get("missing")


def test_retention_and_purge():
    clock = Clock()
    store = JobStore(retention_seconds=10, clock=clock)
    job = store.create("q")
    store.transition(job.id, JobState.PROCESSING)
    store.transition(job.id, JobState.FAILED, error={"stage": "handler"})
    before = store.counts()
    store.get(job.id)
    assert store.counts() == before  # reads have no side effects
    clock.now += 11
    with pytest.raises(RetentionExpired):
        store.get(job.id)
    assert store.purge_expired() == 1
    with pytest.raises(RetentionExpired):
        store.get(job.id)
    assert store.counts()["failed"] == 0


def test_queue_full_reports_retry_after():
    gate = threading.Event()

    def runner(query, options):
        gate.wait(5)
        return {"text": query}, None

    jobs = JobManager(JobStore(), runner, workers=1, queue_size=1, purge_interval=0)
    with jobs:
        jobs.submit("first")
        deadline = time.monotonic() + 2
        while jobs.depth and time.monotonic() < deadline:
            time.sleep(0.01)
        jobs.submit("second")
        with pytest.raises(QueueFull) as info:
            jobs.submit("third")
        assert info.value.retry_after >= 1
        gate.set()
        assert jobs.join(5)
    assert jobs.store.counts()["completed"] == 2


def test_restart_recovers_queued_and_interrupts_running(tmp_path):
    path = str(tmp_path / "jobs.sqlite3")
    store = JobStore(path)
    queued = store.create("queued")
    running = store.create("running")
    store.transition(running.id, JobState.PROCESSING)
    store.close()

    reopened = JobStore(path)
    with JobManager(reopened, lambda q, o: ({"text": q}, None), workers=2, purge_interval=0) as jobs:
        assert jobs.join(5)
    assert reopened.get(queued.id).result == {"text": "queued"}
    assert reopened.get(running.id).error["type"] == "Interrupted"


def test_runner_crash_fails_the_job_not_the_worker():
    def runner(query, options):
        if query == "boom":
            raise RuntimeError("bad")
        return {"text": query}, None

    with JobManager(JobStore(), runner, workers=1, purge_interval=0) as jobs:
        bad = jobs.submit("boom")
        good = jobs.submit("fine")
        assert jobs.join(5)
    assert jobs.get(bad.id).error["type"] == "RuntimeError"
    assert jobs.get(good.id).state is JobState.COMPLETED


# ---------------------------------------------------------------------------
# HTTP API


@pytest.fixture
def api(pipeline):
    store = JobStore()
    jobs = JobManager(store, pipeline_runner(pipeline, store), workers=2, queue_size=4, purge_interval=0)
    with TestClient(create_app(pipeline, jobs)) as client:
        yield client, jobs


def test_api_answer_and_health(api):
    client, _ = api
    ok = client.post("/v1/answer", json={"query": "What is the Hijri date today?"})
    assert ok.status_code == 200 and ok.json()["payload"]["hijri"] == "1446-09-01"
    bad = client.post("/v1/answer", json={"query": "prayer times in Doha", "options": {"date": "nope"}})
    assert bad.status_code == 500 and bad.json()["error"]["stage"] == "handler"
    assert client.post("/v1/answer", json={"query": "   "}).status_code == 422
    assert client.post("/v1/answer", json={"query": "x", "options": {"latitude": 100}}).status_code == 422
    health = client.get("/v1/health").json()
    assert health["status"] == "ok" and health["corpora"]["quran"] > 0


def test_api_job_lifecycle(api):
    client, jobs = api
    submitted = client.post("/v1/jobs", json={"query": "When is Eid al-Fitr?"})
    assert submitted.status_code == 202
    job_id = submitted.json()["id"]
    assert jobs.join(10)
    body = client.get(f"/v1/jobs/{job_id}").json()
    assert body["state"] == "completed" and body["result"]["payload"]["hijri"] == "1446-10-01"
    assert client.get("/v1/jobs/unknown").status_code == 404
    jobs.store.retention_seconds = -1
    assert client.get(f"/v1/jobs/{job_id}").status_code == 410


def test_api_queue_full_is_429(pipeline):
    jobs = JobManager(JobStore(), lambda q, o: ({"text": q}, None), workers=1, queue_size=1, purge_interval=0)
    with TestClient(create_app(pipeline, jobs, start_workers=False)) as client:
        assert client.post("/v1/jobs", json={"query": "a"}).status_code == 202
        full = client.post("/v1/jobs", json={"query": "b"})
        assert full.status_code == 429 and int(full.headers["Retry-After"]) >= 1
