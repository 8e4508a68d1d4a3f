"""The request pipeline.

Stage order is fixed: screen_input, rephrase, classify, route, handler,
quran_guard, screen_output. The input screen runs before any model call so a
blocked query never reaches a model; the output screen runs on the final text
after Quran validation, so nothing unscreened is emitted.
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from collections import OrderedDict
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from ..agent import AgentTrace
from ..clients import (
    ChatClient,
    Embedder,
    ExtractiveAnswerClient,
    HashEmbedder,
    HttpChatClient,
    HttpEmbedder,
    HttpModerationClient,
    KeywordModerationClient,
    ModerationClient,
)
from ..config import Settings
from ..errors import GroundQAError
from ..handlers import HandlerContext, HandlerResult, Services, build_tool_registry, default_handlers
from ..quran_guard import ValidationReport, validate_and_replace
from ..retrieval import CorpusIndex, index_corpus, load_corpora
from ..router import ConversationTurn, HandlerRegistry, IntentDecision, Role, RuleTable, classify, rephrase, route
from ..safety import Blocklist, EmbeddingSemanticScreen, ModerationVerdict, SafetyGate, substitute_safe_response
from ..templates import detect_locale, pick_locale

log = logging.getLogger(__name__)


class Stage(str, Enum):
    SCREEN_INPUT = "screen_input"
    REPHRASE = "rephrase"
    CLASSIFY = "classify"
    ROUTE = "route"
    HANDLER = "handler"
    QURAN_GUARD = "quran_guard"
    SCREEN_OUTPUT = "screen_output"


@dataclass(frozen=True)
class StageError:
    stage: Stage
    error_type: str
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"stage": self.stage.value, "type": self.error_type, "message": self.message}


class PipelineError(GroundQAError):
    def __init__(self, error: StageError):
        self.error = error
        super().__init__(f"{error.stage.value}: {error.error_type}: {error.message}")


@dataclass(frozen=True)
class StageRecord:
    stage: Stage
    status: str  # ok | blocked | error | skipped
    elapsed_ms: float
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        out = {"stage": self.stage.value, "status": self.status, "elapsed_ms": round(self.elapsed_ms, 3)}
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class PipelineResponse:
    text: str
    locale: str
    trace_id: str
    query: str
    rephrased: str | None = None
    decision: IntentDecision | None = None
    validation: ValidationReport | None = None
    input_verdict: ModerationVerdict | None = None
    verdict: ModerationVerdict | None = None
    payload: dict[str, Any] = field(default_factory=dict)
    evidence: tuple[str, ...] = ()
    stages: list[StageRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    error: StageError | None = None
    agent_trace: AgentTrace | None = None
    conversation_id: str | None = None

    @property
    def blocked(self) -> bool:
        v = self.verdict or self.input_verdict
        return v is not None and not v.allowed

    def to_dict(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "locale": self.locale,
            "trace_id": self.trace_id,
            "conversation_id": self.conversation_id,
            "query": self.query,
            "rephrased": self.rephrased,
            "decision": self.decision.to_dict() if self.decision else None,
            "validation": self.validation.to_dict() if self.validation else None,
            "input_verdict": self.input_verdict.to_dict() if self.input_verdict else None,
            "verdict": self.verdict.to_dict() if self.verdict else None,
            "payload": self.payload,
            "evidence": list(self.evidence),
            "stages": [s.to_dict() for s in self.stages],
            "warnings": list(self.warnings),
            "error": self.error.to_dict() if self.error else None,
            "agent_trace": self.agent_trace.to_dict() if self.agent_trace else None,
        }


class ConversationStore:
    """Bounded in-memory history per conversation id (least recently used evicted)."""

    def __init__(self, max_conversations: int = 1024, max_turns: int = 20):
        self._data: OrderedDict[str, list[ConversationTurn]] = OrderedDict()
        self._lock = threading.Lock()
        self.max_conversations = max_conversations
        self.max_turns = max_turns

    def history(self, conversation_id: str | None) -> tuple[ConversationTurn, ...]:
        if conversation_id is None:
            return ()
        with self._lock:
            turns = self._data.get(conversation_id, [])
            if conversation_id in self._data:
                self._data.move_to_end(conversation_id)
            return tuple(turns)

    def append(self, conversation_id: str | None, query: str, answer: str) -> None:
        if conversation_id is None:
            return
        with self._lock:
            turns = self._data.setdefault(conversation_id, [])
            self._data.move_to_end(conversation_id)
            start = turns[-1].index + 1 if turns else 0
            turns.append(ConversationTurn(Role.USER, query, start))
            if answer.strip():
                turns.append(ConversationTurn(Role.ASSISTANT, answer, start + 1))
            del turns[: max(0, len(turns) - self.max_turns)]
            while len(self._data) > self.max_conversations:
                self._data.popitem(last=False)


class Pipeline:
    def __init__(
        self,
        services: Services,
        gate: SafetyGate,
        handlers: HandlerRegistry | None = None,
        rules: RuleTable | None = None,
        conversations: ConversationStore | None = None,
    ):
        self.services = services
        self.gate = gate
        self.handlers = (handlers or default_handlers()).validate()
        self.rules = rules
        self.conversations = conversations or ConversationStore()
        if services.tools is None and services.chat_client is not None:
            services.tools = build_tool_registry(services)

    @classmethod
    def from_settings(
        cls,
        settings: Settings | None = None,
        *,
        chat_client: ChatClient | None = None,
        answer_client: ChatClient | None = None,
        embedder: Embedder | None = None,
        moderation_client: ModerationClient | None = None,
        index: CorpusIndex | None = None,
        **service_overrides,
    ) -> "Pipeline":
        """Wire the pipeline from settings; HTTP clients when URLs are set, offline mocks otherwise."""
        settings = settings or Settings()
        if chat_client is None and settings.model_url:
            chat_client = HttpChatClient(settings.model_url, settings.model_name, settings.api_key)
        if embedder is None:
            embedder = (
                HttpEmbedder(settings.embedder_url, settings.model_name, settings.embedding_dimension, settings.api_key)
                if settings.embedder_url
                else HashEmbedder(settings.embedding_dimension)
            )
        if moderation_client is None:
            moderation_client = HttpModerationClient(settings.moderation_url) if settings.moderation_url else KeywordModerationClient()
        if answer_client is None:
            answer_client = chat_client or ExtractiveAnswerClient()
        if index is None:
            index = index_corpus(load_corpora(settings.corpora), embedder)
        services = Services(
            index=index, embedder=embedder, settings=settings, chat_client=chat_client, answer_client=answer_client,
            **service_overrides,
        )
        gate = SafetyGate(
            Blocklist(settings.blocklist),
            EmbeddingSemanticScreen.from_file(embedder, settings.adversarial_exemplars),
            moderation_client,
            settings.moderation_thresholds,
            settings.input_screen_threshold,
        )
        return cls(services, gate, rules=RuleTable.load(settings.router_rules))

    # ------------------------------------------------------------------

    def answer(
        self,
        query: str,
        conversation_id: str | None = None,
        options: Mapping[str, Any] | None = None,
        history: Sequence[ConversationTurn] | None = None,
    ) -> PipelineResponse:
        """Run every stage; a blocked stage short-circuits with the safe response.

        Failures inside a stage are returned in ``error`` with the stage name,
        never raised, so callers always receive a structured response.
        """
        options = dict(options or {})
        locale = pick_locale(options.pop("locale", None) or detect_locale(query))
        response = PipelineResponse("", locale, uuid.uuid4().hex, query, conversation_id=conversation_id)
        turns = tuple(history) if history is not None else self.conversations.history(conversation_id)
        s = self.services

        def run(stage: Stage, fn, *args):
            start = time.perf_counter()
            try:
                value = fn(*args)
            except Exception as exc:  # noqa: BLE001 - mapped to a structured stage error
                elapsed = (time.perf_counter() - start) * 1000
                response.stages.append(StageRecord(stage, "error", elapsed, type(exc).__name__))
                log.warning("stage %s failed: %s", stage.value, exc)
                raise PipelineError(StageError(stage, type(exc).__name__, str(exc))) from exc
            response.stages.append(StageRecord(stage, "ok", (time.perf_counter() - start) * 1000))
            return value

        def blocked(stage: Stage, verdict: ModerationVerdict) -> PipelineResponse:
            record = response.stages[-1]
            response.stages[-1] = StageRecord(stage, "blocked", record.elapsed_ms, verdict.reason_class.value)
            response.text = substitute_safe_response(verdict, locale)
            return response

        try:
            response.input_verdict = run(Stage.SCREEN_INPUT, self.gate.screen_input, query)
            if not response.input_verdict.allowed:
                return blocked(Stage.SCREEN_INPUT, response.input_verdict)

            rewritten = run(Stage.REPHRASE, rephrase, query, turns, s.chat_client)
            if rewritten.warning:
                response.warnings.append(rewritten.warning)
            standalone = rewritten.text
            response.rephrased = standalone if standalone != query else None

            response.decision = run(Stage.CLASSIFY, classify, standalone, turns, s.chat_client, self.rules)
            handler = run(Stage.ROUTE, route, response.decision, self.handlers)
            ctx = HandlerContext(standalone, response.decision, s, locale, turns, options)
            result: HandlerResult = run(Stage.HANDLER, handler, ctx)
            response.payload, response.evidence, response.agent_trace = result.payload, result.evidence, result.trace
            if result.trace is not None:
                response.trace_id = result.trace.id

            text, report = run(Stage.QURAN_GUARD, validate_and_replace, result.text, s.index, s.embedder, s.settings.quran_threshold)
            response.validation = report
            if report.anomalies:
                response.warnings.extend(f"unbalanced_marker@{a.offset}" for a in report.anomalies)

            response.verdict = run(Stage.SCREEN_OUTPUT, self.gate.screen_output, text)
            if not response.verdict.allowed:
                return blocked(Stage.SCREEN_OUTPUT, response.verdict)
            response.text = text
        except PipelineError as exc:
            response.error = exc.error
            response.text = ""
            return response
        self.conversations.append(conversation_id, query, response.text)
        return response
