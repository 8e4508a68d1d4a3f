"""Input interception and output moderation.

Both stages fail closed: any unavailable dependency produces a block. Score
thresholds are inclusive, so a score exactly at the threshold passes.
"""

from __future__ import annotations

import logging
import os
import re
import threading
from collections.abc import Sequence
from contextlib import nullcontext
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Protocol

import numpy as np

from .clients import Embedder, ModerationClient
from .config import data_path
from .errors import ModerationUnavailable, ScreenUnavailable
from .normalize import normalize
from .templates import load_templates, pick_locale

log = logging.getLogger(__name__)

SCORE_RANGE = (1.0, 5.0)
DEFAULT_THRESHOLDS = (3.0, 3.0)
DEFAULT_INPUT_THRESHOLD = 3.0


class Decision(str, Enum):
    ALLOW = "allow"
    BLOCK_INPUT = "block_input"
    BLOCK_OUTPUT = "block_output"


class ReasonClass(str, Enum):
    NONE = "none"
    BLOCKLIST = "blocklist"
    SEMANTIC = "semantic"
    HARMLESSNESS = "harmlessness"
    CULTURAL_ALIGNMENT = "cultural_alignment"
    UNAVAILABLE = "unavailable"


@dataclass(frozen=True)
class ModerationVerdict:
    decision: Decision
    reason: str
    reason_class: ReasonClass = ReasonClass.NONE
    harmlessness: float | None = None
    cultural_alignment: float | None = None
    rule_id: str | None = None

    @property
    def allowed(self) -> bool:
        return self.decision is Decision.ALLOW

    def to_dict(self) -> dict:
        return {
            "decision": self.decision.value,
            "reason": self.reason,
            "reason_class": self.reason_class.value,
            "harmlessness": self.harmlessness,
            "cultural_alignment": self.cultural_alignment,
            "rule_id": self.rule_id,
        }


ALLOW_INPUT = ModerationVerdict(Decision.ALLOW, "input passed blocklist and semantic screen")


# ---------------------------------------------------------------------------
# blocklist


@dataclass(frozen=True)
class BlockRule:
    id: str
    pattern: str
    regex: re.Pattern | None = None

    def matches(self, normalized: str) -> bool:
        if self.regex is not None:
            return self.regex.search(normalized) is not None
        return self.pattern in normalized


def parse_blocklist(lines: Sequence[str], source: str = "<blocklist>") -> list[BlockRule]:
    rules = []
    seen = set()
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "\t" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'rule_id<TAB>pattern'")
        rule_id, pattern = line.split("\t", 1)
        rule_id, pattern = rule_id.strip(), pattern.strip()
        if not rule_id or not pattern:
            raise ValueError(f"{source}:{lineno}: empty rule id or pattern")
        if rule_id in seen:
            raise ValueError(f"{source}:{lineno}: duplicate rule id {rule_id!r}")
        seen.add(rule_id)
        if pattern.startswith("re:"):
            try:
                rules.append(BlockRule(rule_id, pattern, re.compile(pattern[3:])))
            except re.error as exc:
                raise ValueError(f"{source}:{lineno}: bad regex: {exc}") from exc
        else:
            normalized = normalize(pattern)
            if not normalized:
                raise ValueError(f"{source}:{lineno}: pattern is empty after normalization")
            rules.append(BlockRule(rule_id, normalized))
    return rules


class Blocklist:
    """Pattern set backed by a file; re-read when the file's mtime changes."""

    def __init__(self, path: str | os.PathLike | None = None, rules: Sequence[BlockRule] | None = None):
        self.path = Path(path) if path is not None else None
        if self.path is not None and not self.path.exists() and not self.path.is_absolute():
            self.path = data_path(str(path))
        self._lock = threading.Lock()
        self._mtime: float | None = None
        self._rules: list[BlockRule] = list(rules or [])
        if self.path is not None:
            self.reload()

    @classmethod
    def from_lines(cls, lines: Sequence[str]) -> "Blocklist":
        return cls(rules=parse_blocklist(lines))

    def reload(self) -> None:
        with self._lock:
            mtime = self.path.stat().st_mtime_ns
            text = self.path.read_text(encoding="utf-8")
            self._rules = parse_blocklist(text.splitlines(), str(self.path))
            self._mtime = mtime
            log.info("blocklist loaded: %d rules from %s", len(self._rules), self.path)

    def _maybe_reload(self) -> None:
        if self.path is None:
            return
        try:
            mtime = self.path.stat().st_mtime_ns
        except OSError:
            return  # keep serving the last good copy
        if mtime != self._mtime:
            try:
                self.reload()
            except ValueError as exc:
                log.error("blocklist reload rejected, keeping previous rules: %s", exc)
                self._mtime = mtime

    def __len__(self) -> int:
        return len(self._rules)

    def match(self, text: str) -> BlockRule | None:
        self._maybe_reload()
        normalized = normalize(text)
        for rule in self._rules:
            if rule.matches(normalized):
                return rule
        return None


# ---------------------------------------------------------------------------
# semantic screen


class SemanticScreen(Protocol):
    def score(self, text: str) -> float:
        """Safety score in [1, 5]; higher is safer."""


class EmbeddingSemanticScreen:
    """Scores input by its nearest adversarial exemplar.

    ``score = 5 - 4 * max(0, max_cosine)``; with the default threshold of 3
    an input is blocked when its cosine to some exemplar exceeds 0.5.
    """

    def __init__(self, embedder: Embedder, exemplars: Sequence[str]):
        self.embedder = embedder
        self.exemplars = list(exemplars)
        vectors = np.asarray(embedder.embed(self.exemplars), dtype=float) if self.exemplars else np.zeros((0, 1))
        norms = np.linalg.norm(vectors, axis=1, keepdims=True) if len(vectors) else np.ones((0, 1))
        self._matrix = vectors / np.where(norms > 0, norms, 1)

    @classmethod
    def from_file(cls, embedder: Embedder, path: str = "adversarial_exemplars.txt") -> "EmbeddingSemanticScreen":
        p = Path(path)
        if not p.exists():
            p = data_path(path)
        lines = [l.strip() for l in p.read_text(encoding="utf-8").splitlines()]
        return cls(embedder, [l for l in lines if l and not l.startswith("#")])

    def score(self, text: str) -> float:
        if not len(self._matrix):
            return SCORE_RANGE[1]
        (vec,) = self.embedder.embed([text])
        vec = np.asarray(vec, dtype=float)
        norm = np.linalg.norm(vec)
        if norm == 0:
            return SCORE_RANGE[1]
        similarity = float(np.max(self._matrix @ (vec / norm)))
        return 5.0 - 4.0 * max(0.0, min(1.0, similarity))


def _limiter(client) -> threading.BoundedSemaphore | None:
    limit = getattr(client, "max_concurrency", None)
    return threading.BoundedSemaphore(limit) if limit else None


def _check_thresholds(thresholds: tuple[float, float]) -> None:
    lo, hi = SCORE_RANGE
    if len(thresholds) != 2 or not all(lo <= t <= hi for t in thresholds):
        raise ValueError(f"thresholds must be two values in [{lo}, {hi}], got {thresholds}")


def _valid_score(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and SCORE_RANGE[0] <= value <= SCORE_RANGE[1]


# ---------------------------------------------------------------------------
# gate


class SafetyGate:
    """Bundles the screens with the in-flight limits their clients declare."""

    def __init__(
        self,
        blocklist: Blocklist,
        semantic_screen: SemanticScreen | None,
        moderation_client: ModerationClient,
        thresholds: tuple[float, float] = DEFAULT_THRESHOLDS,
        input_threshold: float = DEFAULT_INPUT_THRESHOLD,
    ):
        _check_thresholds(thresholds)
        self.blocklist = blocklist
        self.semantic_screen = semantic_screen
        self.moderation_client = moderation_client
        self.thresholds = tuple(thresholds)
        self.input_threshold = input_threshold
        self._screen_slots = _limiter(semantic_screen)
        self._moderation_slots = _limiter(moderation_client)

    def screen_input(self, text: str) -> ModerationVerdict:
        return screen_input(text, self.blocklist, self.semantic_screen, self.input_threshold, self._screen_slots)

    def screen_output(self, text: str) -> ModerationVerdict:
        return screen_output(text, self.moderation_client, self.thresholds, self._moderation_slots)


def screen_input(
    text: str,
    blocklist: Blocklist,
    semantic_screen: SemanticScreen | None,
    threshold: float = DEFAULT_INPUT_THRESHOLD,
    slots: threading.Semaphore | None = None,
) -> ModerationVerdict:
    rule = blocklist.match(text)
    log.info("input screen: blocklist %s", f"matched {rule.id}" if rule else "clear")
    if rule is not None:
        return ModerationVerdict(Decision.BLOCK_INPUT, f"blocklist rule {rule.id}", ReasonClass.BLOCKLIST, rule_id=rule.id)
    if semantic_screen is None:
        return ALLOW_INPUT
    try:
        with slots or nullcontext():
            score = semantic_screen.score(text)
        if not _valid_score(score):
            raise ScreenUnavailable(f"semantic screen returned out-of-range score {score!r}")
    except Exception as exc:  # noqa: BLE001 - fail closed
        log.warning("input screen: semantic screen unavailable: %s", exc)
        return ModerationVerdict(
            Decision.BLOCK_INPUT, f"semantic screen unavailable ({type(exc).__name__})", ReasonClass.UNAVAILABLE
        )
    log.info("input screen: semantic score %.3f (threshold %.2f)", score, threshold)
    if score >= threshold:
        return ModerationVerdict(Decision.ALLOW, "input passed blocklist and semantic screen", harmlessness=float(score))
    return ModerationVerdict(
        Decision.BLOCK_INPUT, f"semantic screen score {score:.2f} below {threshold}", ReasonClass.SEMANTIC, harmlessness=float(score)
    )


def screen_output(
    text: str,
    moderation_client: ModerationClient,
    thresholds: tuple[float, float] = DEFAULT_THRESHOLDS,
    slots: threading.Semaphore | None = None,
) -> ModerationVerdict:
    _check_thresholds(thresholds)
    try:
        with slots or nullcontext():
            scores = moderation_client.score(text)
        harm, culture = scores
        if not (_valid_score(harm) and _valid_score(culture)):
            raise ModerationUnavailable(f"moderation scores out of range: {scores!r}")
    except Exception as exc:  # noqa: BLE001 - fail closed
        log.warning("output screen: moderation unavailable: %s", exc)
        return ModerationVerdict(
            Decision.BLOCK_OUTPUT, f"moderation unavailable ({type(exc).__name__})", ReasonClass.UNAVAILABLE
        )
    t_harm, t_culture = thresholds
    harm, culture = float(harm), float(culture)
    if harm < t_harm:
        return ModerationVerdict(
            Decision.BLOCK_OUTPUT, f"harmlessness {harm:.2f} below {t_harm}", ReasonClass.HARMLESSNESS, harm, culture
        )
    if culture < t_culture:
        return ModerationVerdict(
            Decision.BLOCK_OUTPUT,
            f"cultural alignment {culture:.2f} below {t_culture}",
            ReasonClass.CULTURAL_ALIGNMENT,
            harm,
            culture,
        )
    return ModerationVerdict(Decision.ALLOW, "output passed moderation", ReasonClass.NONE, harm, culture)


def substitute_safe_response(verdict: ModerationVerdict, locale: str | None = "en") -> str:
    """Localized refusal for a blocking verdict. Never includes the blocked text."""
    if verdict.decision is Decision.ALLOW:
        raise ValueError("substitute_safe_response called with an allow verdict")
    table = load_templates()["refusals"][verdict.decision.value]
    entry = table.get(verdict.reason_class.value, table["default"])
    return entry[pick_locale(locale)]
