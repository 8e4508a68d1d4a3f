"""Iterative tool-calling loop."""

from __future__ import annotations

import logging
import uuid
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from ..clients import ChatClient, Message, call_model
from ..errors import AgentLoopFailure, InvalidArguments, MalformedToolCall, ToolExecutionFailure, UnknownTool
from ..templates import template
from .protocol import CLOSE_TAG, NO_CALL_TAG, OPEN_TAG, FinalAnswer, MultiToolCall, NoToolCall, ToolCall, parse_model_output, render_tool_result
from .registry import ToolRegistry

log = logging.getLogger(__name__)

AGENT_SYSTEM_PROMPT = (
    "You are a careful assistant for Islamic knowledge questions. You may call tools. "
    f"To call a tool, reply with {OPEN_TAG}{{\"name\": ..., \"arguments\": {{...}}}}{CLOSE_TAG} and nothing else. "
    f"If no tool is needed, reply {NO_CALL_TAG} or answer directly. Tool results arrive as "
    "[tool_result name=...] blocks. Available tools, one JSON schema per line:\n"
)
MALFORMED_NOTICE = (
    "Your last reply contained a malformed tool call ({error}). "
    f"Reply with exactly one well-formed {OPEN_TAG}...{CLOSE_TAG} block or a final answer."
)
UNKNOWN_NOTICE = "There is no tool named {name!r}. Available tools: {names}. Choose one of them or answer directly."
DIRECT_ANSWER_NOTICE = "No tool is needed. Write the final answer to the user's question now."


class StepKind(str, Enum):
    TOOL = "tool"
    NOTICE = "notice"
    FINAL = "final"
    FALLBACK = "fallback"
    ERROR = "error"


@dataclass
class TraceStep:
    kind: StepKind
    model_output: str
    action: str
    tool: str | None = None
    arguments: dict[str, Any] | None = None
    result: str | None = None
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "model_output": self.model_output,
            "action": self.action,
            "tool": self.tool,
            "arguments": self.arguments,
            "result": self.result,
            "error": self.error,
        }


@dataclass
class AgentTrace:
    id: str = field(default_factory=lambda: uuid.uuid4().hex)
    steps: list[TraceStep] = field(default_factory=list)
    iterations: int = 0
    max_iterations: int = 0
    truncated: bool = False

    @property
    def tool_steps(self) -> list[TraceStep]:
        return [s for s in self.steps if s.kind is StepKind.TOOL]

    @property
    def terminal(self) -> TraceStep | None:
        terminal = [s for s in self.steps if s.kind in (StepKind.FINAL, StepKind.FALLBACK, StepKind.ERROR)]
        return terminal[-1] if terminal else None

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "iterations": self.iterations,
            "max_iterations": self.max_iterations,
            "truncated": self.truncated,
            "steps": [s.to_dict() for s in self.steps],
        }


def _conversation_messages(conversation: Sequence[Message] | str) -> list[Message]:
    if isinstance(conversation, str):
        return [{"role": "user", "content": conversation}]
    return [dict(m) for m in conversation]


def run_loop(
    conversation: Sequence[Message] | str,
    registry: ToolRegistry,
    model_client: ChatClient,
    max_iterations: int = 5,
    locale: str = "en",
) -> tuple[FinalAnswer, AgentTrace]:
    """Alternate model turns and tool executions until a final answer.

    Each model call is one iteration. A malformed call is answered with one
    corrective notice; a second consecutive one raises AgentLoopFailure. An
    unknown tool name is reported to the model once; the second raises
    UnknownTool. Tool failures are fed back as error results. When the budget
    runs out the configured fallback answer is returned and the trace is
    marked truncated.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    registry.validate()
    trace = AgentTrace(max_iterations=max_iterations)
    messages: list[Message] = [{"role": "system", "content": AGENT_SYSTEM_PROMPT + registry.describe()}]
    messages += _conversation_messages(conversation)
    malformed_streak = 0
    unknown_seen = False

    while trace.iterations < max_iterations:
        trace.iterations += 1
        output = call_model(model_client, messages)
        messages.append({"role": "assistant", "content": output})
        try:
            parsed = parse_model_output(output)
        except MalformedToolCall as exc:
            if malformed_streak:
                trace.steps.append(TraceStep(StepKind.ERROR, output, "malformed", error=str(exc)))
                raise AgentLoopFailure(f"model produced two malformed tool calls in a row: {exc}", trace) from exc
            malformed_streak += 1
            trace.steps.append(TraceStep(StepKind.NOTICE, output, "malformed", error=str(exc)))
            messages.append({"role": "user", "content": MALFORMED_NOTICE.format(error=exc)})
            continue
        malformed_streak = 0

        if isinstance(parsed, FinalAnswer):
            trace.steps.append(TraceStep(StepKind.FINAL, output, "final_answer", result=parsed.text))
            return parsed, trace
        if isinstance(parsed, NoToolCall):
            trace.steps.append(TraceStep(StepKind.NOTICE, output, "no_tool_call"))
            messages.append({"role": "user", "content": DIRECT_ANSWER_NOTICE})
            continue

        calls = parsed.calls if isinstance(parsed, MultiToolCall) else (parsed,)
        for call in calls:
            step = TraceStep(StepKind.TOOL, output, "tool_call", tool=call.name, arguments=dict(call.arguments))
            try:
                step.result = registry.call(call)
            except UnknownTool as exc:
                if unknown_seen:
                    step.kind, step.error = StepKind.ERROR, str(exc)
                    trace.steps.append(step)
                    raise UnknownTool(call.name, trace) from exc
                unknown_seen = True
                step.kind, step.error = StepKind.NOTICE, str(exc)
                trace.steps.append(step)
                messages.append(
                    {"role": "user", "content": UNKNOWN_NOTICE.format(name=call.name, names=", ".join(registry.names))}
                )
                continue
            except (InvalidArguments, ToolExecutionFailure) as exc:
                step.error = str(exc)
                step.result = f"error: {exc}"
            trace.steps.append(step)
            messages.append({"role": "user", "content": render_tool_result(call.name, step.result)})

    trace.truncated = True
    fallback = template("fallback_answer", locale)
    trace.steps.append(TraceStep(StepKind.FALLBACK, "", "budget_exhausted", result=fallback))
    log.info("agent loop hit max_iterations=%d", max_iterations)
    return FinalAnswer(fallback), trace
