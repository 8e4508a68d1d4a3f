"""Exception hierarchy shared across the package."""

from __future__ import annotations


class GroundQAError(Exception):
    """Base class for all package errors."""


class InvalidInput(GroundQAError, ValueError):
    pass


class EmptyQuery(InvalidInput):
    pass


class ConfigError(GroundQAError):
    pass


# routing
class MissingHandler(ConfigError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"no handler registered for: {', '.join(self.missing)}")


# calculators
class ExtractionIncomplete(GroundQAError):
    def __init__(self, missing, message: str | None = None):
        self.missing = list(missing)
        super().__init__(message or f"missing parameters: {', '.join(self.missing)}")


class NoHeirs(InvalidInput):
    pass


class UnsupportedRelation(InvalidInput):
    pass


# almanac
class OutOfRange(InvalidInput):
    pass


class InvalidHijriDate(InvalidInput):
    pass


class UndefinedTime(GroundQAError):
    def __init__(self, prayer: str, reason: str = "required solar altitude never reached"):
        self.prayer = prayer
        self.reason = reason
        super().__init__(f"{prayer}: {reason}")


class DegenerateLocation(InvalidInput):
    pass


# retrieval
class DuplicateId(InvalidInput):
    pass


class EmbedderDimensionMismatch(GroundQAError):
    pass


class EmptyText(InvalidInput):
    pass


class EmptyCorpus(GroundQAError):
    pass


# quran guard
class UnbalancedMarkers(GroundQAError):
    def __init__(self, offset: int, marker: str):
        self.offset = offset
        self.marker = marker
        super().__init__(f"unbalanced marker {marker!r} at offset {offset}")


# agent loop
class MalformedToolCall(GroundQAError):
    def __init__(self, message: str, raw: str = ""):
        self.raw = raw
        super().__init__(message)


class UnknownTool(GroundQAError):
    def __init__(self, name: str, trace=None):
        self.name = name
        self.trace = trace
        super().__init__(f"unknown tool: {name!r}")


class DuplicateToolName(ConfigError):
    pass


class InvalidArguments(GroundQAError):
    pass


class ToolExecutionFailure(GroundQAError):
    def __init__(self, tool: str, message: str):
        self.tool = tool
        super().__init__(f"{tool}: {message}")


class AgentLoopFailure(GroundQAError):
    """Raised when the loop cannot recover (second malformed call in a row)."""

    def __init__(self, message: str, trace=None):
        self.trace = trace
        super().__init__(message)


# safety
class ScreenUnavailable(GroundQAError):
    pass


class ModerationUnavailable(GroundQAError):
    pass


# evaluation
class EmptyDataset(InvalidInput):
    pass


class NoPositiveCases(InvalidInput):
    pass


class DegenerateAgreement(InvalidInput):
    pass


class LengthMismatch(InvalidInput):
    pass


# service
class UnknownJobId(GroundQAError, KeyError):
    def __str__(self) -> str:
        return f"unknown job id: {self.args[0]!r}" if self.args else "unknown job id"


class RetentionExpired(GroundQAError):
    pass


class QueueFull(GroundQAError):
    def __init__(self, retry_after: float):
        self.retry_after = retry_after
        super().__init__(f"job queue full; retry after {retry_after:g}s")
