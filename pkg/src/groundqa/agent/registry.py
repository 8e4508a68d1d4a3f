"""Tool registry: named specs with parameter schemas and bound handlers."""

from __future__ import annotations

import json
import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

from ..errors import DuplicateToolName, InvalidArguments, ToolExecutionFailure, UnknownTool
from .protocol import ToolCall

log = logging.getLogger(__name__)

_TYPES: dict[str, Callable[[Any], bool]] = {
    "string": lambda v: isinstance(v, str),
    "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "integer": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "boolean": lambda v: isinstance(v, bool),
    "object": lambda v: isinstance(v, dict),
    "array": lambda v: isinstance(v, list),
    "any": lambda v: True,
}


@dataclass(frozen=True)
class Param:
    name: str
    type: str = "string"
    required: bool = False
    description: str = ""
    enum: tuple[Any, ...] = ()

    def __post_init__(self):
        if self.type not in _TYPES:
            raise ValueError(f"unknown parameter type {self.type!r}")


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    parameters: tuple[Param, ...] = ()
    output: str = ""

    def validate(self, arguments: Mapping[str, Any]) -> None:
        known = {p.name: p for p in self.parameters}
        unknown = sorted(set(arguments) - set(known))
        if unknown:
            raise InvalidArguments(f"{self.name}: unexpected argument(s) {', '.join(unknown)}")
        for param in self.parameters:
            if param.name not in arguments or arguments[param.name] is None:
                if param.required:
                    raise InvalidArguments(f"{self.name}: missing required argument {param.name!r}")
                continue
            value = arguments[param.name]
            if not _TYPES[param.type](value):
                raise InvalidArguments(f"{self.name}: {param.name!r} should be {param.type}, got {type(value).__name__}")
            if param.enum and value not in param.enum:
                raise InvalidArguments(f"{self.name}: {param.name!r} must be one of {list(param.enum)}")

    def to_schema(self) -> dict[str, Any]:
        """Function-calling schema in the common JSON-schema dialect."""
        props = {}
        for p in self.parameters:
            prop: dict[str, Any] = {"type": p.type if p.type != "any" else "string", "description": p.description}
            if p.enum:
                prop["enum"] = list(p.enum)
            props[p.name] = prop
        return {
            "name": self.name,
            "description": self.description,
            "parameters": {
                "type": "object",
                "properties": props,
                "required": [p.name for p in self.parameters if p.required],
            },
        }


Handler = Callable[..., Any]


def _as_text(value: Any) -> str:
    if isinstance(value, str):
        return value
    if hasattr(value, "to_dict"):
        value = value.to_dict()
    return json.dumps(value, ensure_ascii=False, default=str)


class ToolRegistry:
    def __init__(self):
        self._tools: dict[str, tuple[ToolSpec, Handler]] = {}

    def register(self, spec: ToolSpec, handler: Handler) -> "ToolRegistry":
        if spec.name in self._tools:
            raise DuplicateToolName(f"tool {spec.name!r} is already registered")
        self._tools[spec.name] = (spec, handler)
        return self

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def __len__(self) -> int:
        return len(self._tools)

    @property
    def names(self) -> list[str]:
        return list(self._tools)

    def spec(self, name: str) -> ToolSpec:
        try:
            return self._tools[name][0]
        except KeyError:
            raise UnknownTool(name) from None

    def specs(self) -> list[ToolSpec]:
        return [spec for spec, _ in self._tools.values()]

    def validate(self) -> "ToolRegistry":
        if not self._tools:
            raise ValueError("registry has no tools")
        return self

    def call(self, call: ToolCall) -> str:
        """Validate arguments, run the handler, return its result as text."""
        if call.name not in self._tools:
            raise UnknownTool(call.name)
        spec, handler = self._tools[call.name]
        spec.validate(call.arguments)
        try:
            result = handler(**call.arguments)
        except ToolExecutionFailure:
            raise
        except Exception as exc:  # noqa: BLE001 - any tool failure is reported, not propagated
            log.warning("tool %s failed: %s", call.name, exc)
            raise ToolExecutionFailure(call.name, f"{type(exc).__name__}: {exc}") from exc
        return _as_text(result)

    def describe(self) -> str:
        """Tool inventory for the system prompt."""
        return "\n".join(json.dumps(spec.to_schema(), ensure_ascii=False) for spec in self.specs())


def register_tool(registry: ToolRegistry, spec: ToolSpec, handler: Handler) -> ToolRegistry:
    return registry.register(spec, handler)


def params(*items: Param | tuple) -> tuple[Param, ...]:
    return tuple(p if isinstance(p, Param) else Param(*p) for p in items)


def stub_handler(name: str) -> Handler:
    def handler(**_: Any) -> str:
        raise ToolExecutionFailure(name, "this platform service is not available in this deployment")

    return handler


PLATFORM_STUBS: Sequence[ToolSpec] = (
    ToolSpec("translation", "Translate text between Arabic and English.",
             params(("text", "string", True), ("target_language", "string", True, "", ("ar", "en"))), "translated text"),
    ToolSpec("image_generation", "Generate an image from a text description.",
             params(("prompt", "string", True)), "image URL"),
    ToolSpec("speech", "Convert text to speech or speech to text.",
             params(("text", "string", False), ("audio_url", "string", False), ("direction", "string", True, "", ("tts", "stt"))),
             "audio URL or transcript"),
    ToolSpec("recency_search", "Search recent news and web content.",
             params(("query", "string", True)), "list of recent results"),
)
