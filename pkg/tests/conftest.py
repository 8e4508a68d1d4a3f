from __future__ import annotations

import datetime as dt
import json

import pytest

from groundqa.agent.loop import AGENT_SYSTEM_PROMPT
from groundqa.clients import ExtractiveAnswerClient, HashEmbedder, ScriptedClient, StaticModerationClient
from groundqa.config import Settings, data_path
from groundqa.handlers import Services
from groundqa.retrieval import index_corpus, load_corpora
from groundqa.router import CLASSIFY_SYSTEM_PROMPT, RuleTable
from groundqa.safety import Blocklist, EmbeddingSemanticScreen, SafetyGate
from groundqa.service.pipeline import Pipeline

TODAY = dt.date(2025, 3, 1)


# ---------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed
    if report.when == "call" or failed:
        previous = _CRITERIA.get(number, (title, "PASS"))[1]
        status = "FAIL" if failed or previous == "FAIL" else "PASS"
        if report.when == "call" and report.skipped:
            status = "SKIP"
        _CRITERIA[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2} {status}  {title}")


# ---------------------------------------------------------------------------
# shared resources


@pytest.fixture(scope="session")
def embedder() -> HashEmbedder:
    return HashEmbedder(64)


@pytest.fixture(scope="session")
def documents():
    return load_corpora()


@pytest.fixture(scope="session")
def index(documents, embedder):
    return index_corpus(documents, embedder)


@pytest.fixture(scope="session")
def rules() -> RuleTable:
    return RuleTable.load()


def make_gate(embedder, moderation=None, thresholds=(3.0, 3.0), blocklist=None) -> SafetyGate:
    return SafetyGate(
        blocklist or Blocklist(str(data_path("blocklist.txt"))),
        EmbeddingSemanticScreen.from_file(embedder, str(data_path("adversarial_exemplars.txt"))),
        moderation or StaticModerationClient(5.0, 5.0),
        thresholds,
    )


def make_services(index, embedder, **overrides) -> Services:
    overrides.setdefault("answer_client", ExtractiveAnswerClient())
    overrides.setdefault("today", lambda: TODAY)
    return Services(index=index, embedder=embedder, settings=Settings(), **overrides)


@pytest.fixture
def services(index, embedder) -> Services:
    return make_services(index, embedder)


@pytest.fixture
def pipeline(index, embedder, rules) -> Pipeline:
    """Offline pipeline: no chat model, extractive answers, permissive moderation."""
    return Pipeline(make_services(index, embedder), make_gate(embedder), rules=rules)


class ScriptedModel:
    """A chat mock that answers by role: classifier, agent loop or rephraser.

    ``labels`` maps a query to the intent the classifier should return;
    the agent calls ``agent_tool`` once and then answers from its result.
    """

    def __init__(self, labels: dict[str, str] | None = None, agent_tool=("hijri_calendar", {"query": "2025-03-01"})):
        self.labels = labels or {}
        self.agent_tool = agent_tool
        self.client = ScriptedClient(self._reply)

    def _reply(self, messages):
        system = messages[0]["content"] if messages and messages[0]["role"] == "system" else ""
        last = messages[-1]["content"]
        if system == CLASSIFY_SYSTEM_PROMPT:
            label = self.labels.get(last, "general_knowledge")
            return json.dumps({"label": label, "confidence": 0.9, "rationale": "scripted", "sub_questions": []})
        if system.startswith(AGENT_SYSTEM_PROMPT):
            if last.startswith("[tool_result"):
                return "Based on the calendar tool: " + last.splitlines()[1][:200]
            name, arguments = self.agent_tool
            return "<tool_call>" + json.dumps({"name": name, "arguments": arguments}) + "</tool_call>"
        return last

    @property
    def call_count(self) -> int:
        return self.client.call_count

    def generate(self, messages):
        return self.client.generate(messages)
