from __future__ import annotations

import json

import pytest

from groundqa.agent import (
    EvidenceItem,
    FinalAnswer,
    MultiToolCall,
    NoToolCall,
    Param,
    StepKind,
    ToolCall,
    ToolRegistry,
    ToolSpec,
    assemble_grounded_answer,
    parse_model_output,
    render,
    render_tool_result,
    run_loop,
    stub_handler,
)
from groundqa.clients import ExtractiveAnswerClient, FailingClient, ScriptedClient
from groundqa.errors import AgentLoopFailure, DuplicateToolName, InvalidArguments, MalformedToolCall, ToolExecutionFailure, UnknownTool
from groundqa.templates import template


def tc(name, **args):
    return f"<tool_call>{json.dumps({'name': name, 'arguments': args})}</tool_call>"


def registry():
    reg = ToolRegistry()
    reg.register(ToolSpec("add", "add numbers", (Param("a", "number", True), Param("b", "number", True))), lambda a, b: a + b)
    reg.register(ToolSpec("boom", "always fails"), lambda: 1 / 0)
    reg.register(ToolSpec("translation", "stub"), stub_handler("translation"))
    return reg


# ---------------------------------------------------------------------------
# protocol


def test_parse_variants():
    assert parse_model_output("  <no_tool_call>  ") == NoToolCall()
    assert parse_model_output("<no_tool_call> The answer is 4.") == FinalAnswer("The answer is 4.")
    assert parse_model_output("plain answer") == FinalAnswer("plain answer")
    assert parse_model_output('<tool_call> {"name": "x", "parameters": {"k": 1}} </tool_call>') == ToolCall("x", {"k": 1})
    assert parse_model_output('<tool_call>{"name": "x", "arguments": "{\\"k\\": 2}"}</tool_call>') == ToolCall("x", {"k": 2})
    multi = parse_model_output(tc("a", x=1) + " then " + tc("b"))
    assert multi == MultiToolCall((ToolCall("a", {"x": 1}), ToolCall("b", {})))


@pytest.mark.parametrize(
    "text",
    [
        "<tool_call>{}</tool_call>",
        '<tool_call>{"name": ""}</tool_call>',
        '<tool_call>{"name": "x", "arguments": [1]}</tool_call>',
        '<tool_call>{"name": "x"}',
        "oops </tool_call>",
        '<tool_call>{"name": "x", "arguments": "not json"}</tool_call>',
        '<tool_call>{"name": "x", "arguments": {"v": NaN}}</tool_call>',
    ],
)
def test_malformed(text):
    with pytest.raises(MalformedToolCall):
        parse_model_output(text)


def test_render_is_bit_exact():
    assert render(ToolCall("prayer_times", {"city": "Doha"})) == '<tool_call>{"name": "prayer_times", "arguments": {"city": "Doha"}}</tool_call>'
    assert render(NoToolCall()) == "<no_tool_call>"
    assert render_tool_result("t", "ok") == "[tool_result name=t]\nok\n[/tool_result]"
    with pytest.raises(ValueError):
        ToolCall("x", {"v": float("inf")})
    with pytest.raises(ValueError):
        ToolCall(" ")


# ---------------------------------------------------------------------------
# registry


def test_registry_validation_and_errors():
    reg = registry()
    assert reg.call(ToolCall("add", {"a": 2, "b": 3})) == "5"
    with pytest.raises(InvalidArguments):
        reg.call(ToolCall("add", {"a": 2}))
    with pytest.raises(InvalidArguments):
        reg.call(ToolCall("add", {"a": "2", "b": 3}))
    with pytest.raises(InvalidArguments):
        reg.call(ToolCall("add", {"a": 1, "b": 2, "c": 3}))
    with pytest.raises(ToolExecutionFailure, match="ZeroDivisionError"):
        reg.call(ToolCall("boom"))
    with pytest.raises(ToolExecutionFailure):
        reg.call(ToolCall("translation"))
    with pytest.raises(UnknownTool):
        reg.call(ToolCall("nope"))
    with pytest.raises(DuplicateToolName):
        reg.register(ToolSpec("add", "again"), lambda: 0)
    schema = json.loads(reg.describe().splitlines()[0])
    assert schema["parameters"]["required"] == ["a", "b"]


# ---------------------------------------------------------------------------
# loop


def test_loop_calls_tool_then_answers():
    client = ScriptedClient([tc("add", a=2, b=2), "The sum is 4."])
    answer, trace = run_loop("what is 2+2?", registry(), client)
    assert answer == FinalAnswer("The sum is 4.")
    assert [s.kind for s in trace.steps] == [StepKind.TOOL, StepKind.FINAL]
    assert trace.steps[0].result == "4" and not trace.truncated
    assert client.calls[1][-1]["content"] == render_tool_result("add", "4")
    assert trace.to_dict()["iterations"] == 2


def test_loop_feeds_tool_errors_back():
    client = ScriptedClient([tc("boom"), tc("add", a=1), "gave up"])
    answer, trace = run_loop("q", registry(), client)
    assert answer.text == "gave up"
    assert trace.steps[0].error and trace.steps[1].error
    assert "error:" in client.calls[1][-1]["content"]


def test_malformed_once_then_recovers_twice_fails():
    ok = ScriptedClient(['<tool_call>{"name":', "fine"])
    answer, trace = run_loop("q", registry(), ok)
    assert answer.text == "fine" and trace.steps[0].kind is StepKind.NOTICE
    bad = ScriptedClient(['<tool_call>{"name":', "<tool_call>[]</tool_call>"])
    with pytest.raises(AgentLoopFailure) as info:
        run_loop("q", registry(), bad)
    assert info.value.trace is not None and info.value.trace.steps[-1].kind is StepKind.ERROR


def test_unknown_tool_is_reported_once():
    ok = ScriptedClient([tc("nope"), "answer"])
    answer, _ = run_loop("q", registry(), ok)
    assert answer.text == "answer"
    assert "There is no tool named 'nope'" in ok.calls[1][-1]["content"]
    with pytest.raises(UnknownTool):
        run_loop("q", registry(), ScriptedClient([tc("nope"), tc("other")]))


def test_no_tool_call_prompts_for_a_direct_answer():
    client = ScriptedClient(["<no_tool_call>", "direct"])
    answer, trace = run_loop("hi", registry(), client)
    assert answer.text == "direct" and trace.steps[0].kind is StepKind.NOTICE


def test_budget_exhaustion_returns_fallback():
    answer, trace = run_loop("q", registry(), ScriptedClient([tc("add", a=1, b=1)], repeat_last=True), max_iterations=2)
    assert trace.truncated and answer.text == template("fallback_answer", "en")
    assert trace.steps[-1].kind is StepKind.FALLBACK
    with pytest.raises(ValueError):
        run_loop("q", registry(), ScriptedClient(["x"]), max_iterations=0)


# ---------------------------------------------------------------------------
# grounded answers


def test_grounded_answer_keeps_only_resolvable_citations():
    items = [EvidenceItem("d1", "first"), EvidenceItem("d2", "second")]
    reply = json.dumps({
        "ruling": "Yes.",
        "evidence": [{"text": "a", "sources": ["d1", "ghost"]}, {"text": "b", "sources": ["ghost"]}, {"text": "c", "sources": "d2"}],
        "explanation": "because",
    })
    answer = assemble_grounded_answer("q", items, ScriptedClient([reply]))
    assert [e.sources for e in answer.evidence] == [("d1",), ("d2",)]
    assert "[d1]" in answer.render() and not answer.abstained


def test_grounded_answer_abstains():
    items = [EvidenceItem("d1", "first")]
    assert assemble_grounded_answer("q", [], ScriptedClient(["{}"])).abstained
    assert assemble_grounded_answer("q", items, None).abstained
    assert assemble_grounded_answer("q", items, FailingClient()).abstained
    assert assemble_grounded_answer("q", items, ScriptedClient(['{"ruling": ""}'])).abstained


def test_extractive_client_cites_every_evidence_line():
    items = [EvidenceItem("q:1", "in the name of God", corpus="quran"), EvidenceItem("h:1", "actions are by intentions")]
    answer = assemble_grounded_answer("q", items, ExtractiveAnswerClient())
    assert {s for _, s in answer.citations} == {"q:1", "h:1"}
