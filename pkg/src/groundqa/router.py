"""Intent routing: query rephrasing, hybrid rule/model classification, dispatch."""

from __future__ import annotations

import json
import logging
import re
from collections.abc import Callable, Mapping, Sequence
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, NamedTuple

from .clients import ChatClient, call_model, extract_json_object
from .config import load_json
from .errors import ConfigError, EmptyQuery, MissingHandler
from .normalize import normalize

log = logging.getLogger(__name__)


class Intent(str, Enum):
    FIQH_REASONING = "fiqh_reasoning"
    QURAN_RETRIEVAL = "quran_retrieval"
    HADITH_VERIFICATION = "hadith_verification"
    ZAKAT_CALCULATION = "zakat_calculation"
    INHERITANCE_COMPUTATION = "inheritance_computation"
    SUPPLICATION_LOOKUP = "supplication_lookup"
    CALENDAR_QUERY = "calendar_query"
    PRAYER_TIMES = "prayer_times"
    GENERAL_KNOWLEDGE = "general_knowledge"


# intents answered by deterministic computation need no external evidence
NO_RETRIEVAL = frozenset(
    {Intent.ZAKAT_CALCULATION, Intent.INHERITANCE_COMPUTATION, Intent.CALENDAR_QUERY, Intent.PRAYER_TIMES}
)


class DecisionSource(str, Enum):
    RULE_LAYER = "rule_layer"
    MODEL_LAYER = "model_layer"


@dataclass(frozen=True)
class IntentDecision:
    label: Intent
    confidence: float
    rationale: str
    sub_questions: tuple[str, ...] = ()
    retrieval_required: bool = True
    source: DecisionSource = DecisionSource.MODEL_LAYER

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["label"] = self.label.value
        out["source"] = self.source.value
        out["sub_questions"] = list(self.sub_questions)
        return out


class Role(str, Enum):
    USER = "user"
    ASSISTANT = "assistant"
    TOOL = "tool"


@dataclass(frozen=True)
class ConversationTurn:
    role: Role
    text: str
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("turn index must be nonnegative")
        if Role(self.role) is Role.USER and not self.text.strip():
            raise ValueError("user turns must have text")


def validate_history(history: Sequence[ConversationTurn]) -> None:
    for prev, cur in zip(history, history[1:]):
        if cur.index <= prev.index:
            raise ValueError("conversation turn indices must be strictly increasing")


# ---------------------------------------------------------------------------
# rule layer


@dataclass(frozen=True)
class Rule:
    id: str
    label: Intent
    pattern: str
    kind: str = "substring"
    _regex: re.Pattern | None = field(default=None, compare=False, repr=False)

    def matches(self, normalized_query: str) -> bool:
        if self.kind == "substring":
            return self.pattern in normalized_query
        if self.kind == "word":
            return f" {self.pattern} " in f" {normalized_query} "
        return self._regex.search(normalized_query) is not None


class RuleTable:
    """Keyword/pattern rules evaluated in a fixed label priority order."""

    def __init__(self, rules: Mapping[Intent, Sequence[Rule]], priority: Sequence[Intent], version: str = "unversioned"):
        self.rules = {label: tuple(rs) for label, rs in rules.items()}
        self.priority = tuple(priority)
        self.version = version
        missing = set(self.rules) - set(self.priority)
        if missing:
            raise ConfigError(f"rules for labels absent from priority list: {sorted(m.value for m in missing)}")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "RuleTable":
        rules: dict[Intent, list[Rule]] = {}
        for label_name, entries in raw.get("rules", {}).items():
            label = Intent(label_name)
            for entry in entries:
                kind = entry.get("kind", "substring")
                pattern = entry["pattern"]
                if kind in {"substring", "word"}:
                    rule = Rule(entry["id"], label, normalize(pattern), kind)
                elif kind == "regex":
                    rule = Rule(entry["id"], label, pattern, kind, re.compile(pattern))
                else:
                    raise ConfigError(f"rule {entry['id']}: unknown kind {kind!r}")
                rules.setdefault(label, []).append(rule)
        priority = [Intent(p) for p in raw.get("priority", [])]
        return cls(rules, priority, raw.get("version", "unversioned"))

    @classmethod
    def load(cls, path: str = "router_rules.json") -> "RuleTable":
        return cls.from_dict(load_json(path, log_checksum=True))

    def match(self, query: str) -> Rule | None:
        norm = normalize(query)
        for label in self.priority:
            for rule in self.rules.get(label, ()):
                if rule.matches(norm):
                    return rule
        return None


# ---------------------------------------------------------------------------
# rephrasing

REPHRASE_SYSTEM_PROMPT = (
    "Rewrite the user's latest message as a standalone question, resolving every "
    "pronoun and reference from the conversation history. Keep the user's language. "
    "Reply with the rewritten question only."
)


class Rephrased(NamedTuple):
    text: str
    warning: str | None = None


def _history_messages(history: Sequence[ConversationTurn]) -> list[dict[str, str]]:
    return [{"role": Role(t.role).value, "content": t.text} for t in history]


def rephrase(query: str, history: Sequence[ConversationTurn] = (), model_client: ChatClient | None = None) -> Rephrased:
    """Resolve references to earlier turns; degrade to the input on any failure."""
    if not query.strip():
        raise EmptyQuery("query is empty")
    if not history or model_client is None:
        return Rephrased(query)
    messages = [{"role": "system", "content": REPHRASE_SYSTEM_PROMPT}, *_history_messages(history)]
    messages.append({"role": "user", "content": query})
    try:
        rewritten = call_model(model_client, messages).strip()
    except Exception as exc:  # noqa: BLE001 - any client failure degrades
        log.warning("rephrase failed, passing query through: %s", exc)
        return Rephrased(query, f"rephrase_failed: {type(exc).__name__}")
    if not rewritten:
        return Rephrased(query, "rephrase_failed: empty rewrite")
    return Rephrased(rewritten)


# ---------------------------------------------------------------------------
# classification

CLASSIFY_SYSTEM_PROMPT = (
    "Classify the user's question into exactly one intent: "
    + ", ".join(i.value for i in Intent)
    + ". Reply with one JSON object with keys: label (one of the intents), "
    "confidence (0..1), rationale (short text), sub_questions (list of strings; "
    "non-empty only when the question is compound) and retrieval_required (boolean)."
)


def _fallback(reason: str) -> IntentDecision:
    return IntentDecision(
        label=Intent.GENERAL_KNOWLEDGE,
        confidence=0.0,
        rationale=f"fallback to general_knowledge: {reason}",
        retrieval_required=True,
        source=DecisionSource.MODEL_LAYER,
    )


def parse_classifier_output(text: str) -> IntentDecision:
    try:
        obj = extract_json_object(text)
    except (ValueError, json.JSONDecodeError) as exc:
        return _fallback(f"unparseable classifier output ({exc})")
    try:
        label = Intent(obj.get("label"))
    except ValueError:
        return _fallback(f"unknown label {obj.get('label')!r}")
    confidence = obj.get("confidence", 0.0)
    if isinstance(confidence, bool) or not isinstance(confidence, (int, float)) or not 0.0 <= confidence <= 1.0:
        return _fallback(f"invalid confidence {confidence!r}")
    subs = obj.get("sub_questions") or []
    if not isinstance(subs, list) or not all(isinstance(s, str) for s in subs):
        return _fallback("sub_questions is not a list of strings")
    retrieval = obj.get("retrieval_required")
    if not isinstance(retrieval, bool):
        retrieval = label not in NO_RETRIEVAL
    return IntentDecision(
        label=label,
        confidence=float(confidence),
        rationale=str(obj.get("rationale", ""))[:500],
        sub_questions=tuple(s for s in subs if s.strip()),
        retrieval_required=retrieval,
        source=DecisionSource.MODEL_LAYER,
    )


def classify(
    query: str,
    history: Sequence[ConversationTurn] = (),
    model_client: ChatClient | None = None,
    rules: RuleTable | None = None,
) -> IntentDecision:
    if not query or not query.strip():
        raise EmptyQuery("query is empty")
    rules = rules if rules is not None else default_rules()
    rule = rules.match(query)
    if rule is not None:
        return IntentDecision(
            label=rule.label,
            confidence=1.0,
            rationale=f"rule {rule.id} matched",
            retrieval_required=rule.label not in NO_RETRIEVAL,
            source=DecisionSource.RULE_LAYER,
        )
    if model_client is None:
        return _fallback("no rule fired and no classifier client configured")
    messages = [{"role": "system", "content": CLASSIFY_SYSTEM_PROMPT}, *_history_messages(history)]
    messages.append({"role": "user", "content": query})
    try:
        reply = call_model(model_client, messages)
    except Exception as exc:  # noqa: BLE001
        log.warning("classifier client failed: %s", exc)
        return _fallback(f"classifier client failed ({type(exc).__name__})")
    return parse_classifier_output(reply)


_default_rules: RuleTable | None = None


def default_rules() -> RuleTable:
    global _default_rules
    if _default_rules is None:
        _default_rules = RuleTable.load()
    return _default_rules


# ---------------------------------------------------------------------------
# dispatch


class HandlerRegistry:
    """Maps every intent label to a handler; validated once at startup."""

    def __init__(self, handlers: Mapping[Intent | str, Callable] | None = None):
        self._handlers: dict[Intent, Callable] = {}
        for label, handler in (handlers or {}).items():
            self.register(label, handler)

    def register(self, label: Intent | str, handler: Callable) -> None:
        self._handlers[Intent(label)] = handler

    def validate(self) -> "HandlerRegistry":
        missing = {i.value for i in Intent} - {i.value for i in self._handlers}
        if missing:
            raise MissingHandler(missing)
        return self

    def __contains__(self, label) -> bool:
        return Intent(label) in self._handlers

    def __getitem__(self, label) -> Callable:
        try:
            return self._handlers[Intent(label)]
        except KeyError:
            raise MissingHandler({Intent(label).value}) from None


def route(decision: IntentDecision, registry: HandlerRegistry) -> Callable:
    return registry[decision.label]
