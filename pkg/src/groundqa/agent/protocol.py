"""Tag wire format for tool calls.

    <tool_call>{"name": "prayer_times", "arguments": {"city": "Doha"}}</tool_call>
    <no_tool_call>

A model turn may hold several ``<tool_call>`` blocks; they are executed in
emission order. Text between blocks is ignored. Tool output is fed back as::

    [tool_result name=prayer_times]
    ...
    [/tool_result]
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any, Union

from ..errors import MalformedToolCall

OPEN_TAG = "<tool_call>"
CLOSE_TAG = "</tool_call>"
NO_CALL_TAG = "<no_tool_call>"

_decoder = json.JSONDecoder()


def _check_value(value: Any, path: str) -> None:
    if value is None or isinstance(value, (str, bool, int)):
        return
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"{path}: non-finite number")
        return
    if isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _check_value(item, f"{path}[{i}]")
        return
    if isinstance(value, Mapping):
        for key, item in value.items():
            if not isinstance(key, str):
                raise ValueError(f"{path}: non-string key {key!r}")
            _check_value(item, f"{path}.{key}")
        return
    raise ValueError(f"{path}: unsupported argument type {type(value).__name__}")


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name.strip():
            raise ValueError("tool call name must be a non-empty string")
        if not isinstance(self.arguments, Mapping):
            raise ValueError("tool call arguments must be a mapping")
        _check_value(self.arguments, "arguments")

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "arguments": dict(self.arguments)}


@dataclass(frozen=True)
class NoToolCall:
    def to_dict(self) -> None:
        return None


@dataclass(frozen=True)
class FinalAnswer:
    text: str


@dataclass(frozen=True)
class MultiToolCall:
    calls: tuple[ToolCall, ...]


Parsed = Union[ToolCall, MultiToolCall, NoToolCall, FinalAnswer]


def render(call: ToolCall | NoToolCall) -> str:
    if isinstance(call, NoToolCall):
        return NO_CALL_TAG
    body = json.dumps({"name": call.name, "arguments": dict(call.arguments)}, ensure_ascii=False, allow_nan=False)
    return f"{OPEN_TAG}{body}{CLOSE_TAG}"


def render_tool_result(name: str, result: str) -> str:
    return f"[tool_result name={name}]\n{result}\n[/tool_result]"


def _call_from_object(obj: Any, raw: str) -> ToolCall:
    if not isinstance(obj, dict):
        raise MalformedToolCall("tool call body must be a JSON object", raw)
    name = obj.get("name")
    if not isinstance(name, str) or not name.strip():
        raise MalformedToolCall("tool call is missing a name", raw)
    arguments = obj.get("arguments", obj.get("parameters", {}))
    if isinstance(arguments, str):
        # some models double-encode the argument object
        try:
            arguments = json.loads(arguments)
        except json.JSONDecodeError as exc:
            raise MalformedToolCall(f"arguments string is not JSON: {exc}", raw) from exc
    if arguments is None:
        arguments = {}
    if not isinstance(arguments, dict):
        raise MalformedToolCall("tool call arguments must be an object", raw)
    try:
        return ToolCall(name, arguments)
    except ValueError as exc:
        raise MalformedToolCall(str(exc), raw) from exc


def parse_model_output(text: str) -> Parsed:
    """Classify one model turn.

    Raises :class:`MalformedToolCall` for an unclosed tag, an invalid object
    or a missing name. Never raises anything else for string input.
    """
    if not isinstance(text, str):
        raise MalformedToolCall(f"model output must be text, got {type(text).__name__}")
    stripped = text.strip()
    if stripped.startswith(NO_CALL_TAG) and OPEN_TAG not in stripped:
        rest = stripped[len(NO_CALL_TAG) :].strip()
        return FinalAnswer(rest) if rest else NoToolCall()
    if OPEN_TAG not in text:
        if CLOSE_TAG in text:
            raise MalformedToolCall("closing tag without an opening tag", text)
        return FinalAnswer(text)

    calls: list[ToolCall] = []
    pos = text.find(OPEN_TAG)
    while pos != -1:
        start = pos + len(OPEN_TAG)
        body_start = start
        while body_start < len(text) and text[body_start].isspace():
            body_start += 1
        try:
            obj, end = _decoder.raw_decode(text, body_start)
        except (ValueError, RecursionError) as exc:
            raise MalformedToolCall(f"invalid tool call object: {exc}", text) from None
        while end < len(text) and text[end].isspace():
            end += 1
        if not text.startswith(CLOSE_TAG, end):
            raise MalformedToolCall("unclosed <tool_call> tag", text)
        calls.append(_call_from_object(obj, text))
        pos = text.find(OPEN_TAG, end + len(CLOSE_TAG))
    if len(calls) == 1:
        return calls[0]
    return MultiToolCall(tuple(calls))
