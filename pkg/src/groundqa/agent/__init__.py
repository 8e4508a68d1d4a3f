from .grounding import EvidenceEntry, EvidenceItem, GroundedAnswer, abstention, assemble_grounded_answer
from .loop import AgentTrace, StepKind, TraceStep, run_loop
from .protocol import (
    CLOSE_TAG,
    NO_CALL_TAG,
    OPEN_TAG,
    FinalAnswer,
    MultiToolCall,
    NoToolCall,
    ToolCall,
    parse_model_output,
    render,
    render_tool_result,
)
from .registry import PLATFORM_STUBS, Param, ToolRegistry, ToolSpec, params, register_tool, stub_handler

__all__ = [
    "EvidenceEntry", "EvidenceItem", "GroundedAnswer", "abstention", "assemble_grounded_answer",
    "AgentTrace", "StepKind", "TraceStep", "run_loop",
    "CLOSE_TAG", "NO_CALL_TAG", "OPEN_TAG", "FinalAnswer", "MultiToolCall", "NoToolCall", "ToolCall",
    "parse_model_output", "render", "render_tool_result",
    "PLATFORM_STUBS", "Param", "ToolRegistry", "ToolSpec", "params", "register_tool", "stub_handler",
]
