"""Pluggable model, embedder and moderation clients.

Three contracts are used throughout the package:

``ChatClient``
    ``generate(messages) -> str`` where ``messages`` is a list of
    ``{"role": ..., "content": ...}`` dicts. Clients that cannot take
    concurrent calls set ``serial = True``; :func:`call_model` then
    serializes access.
``Embedder``
    ``dimension`` attribute plus ``embed(texts) -> list of vectors``.
``ModerationClient``
    ``score(text) -> (harmlessness, cultural_alignment)``, both in [1, 5].
    ``max_concurrency`` bounds in-flight calls (``None`` = unbounded).

The deterministic mocks below make the whole system runnable offline; the
HTTP clients talk to OpenAI-compatible endpoints.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import weakref
from collections.abc import Callable, Mapping, Sequence
from typing import Any, Protocol, runtime_checkable

import numpy as np

from .normalize import normalize, tokenize

Message = dict[str, str]


@runtime_checkable
class ChatClient(Protocol):
    def generate(self, messages: list[Message]) -> str: ...


@runtime_checkable
class Embedder(Protocol):
    dimension: int

    def embed(self, texts: Sequence[str]) -> list[Sequence[float]]: ...


@runtime_checkable
class ModerationClient(Protocol):
    def score(self, text: str) -> tuple[float, float]: ...


_serial_locks: "weakref.WeakKeyDictionary[Any, threading.Lock]" = weakref.WeakKeyDictionary()
_serial_guard = threading.Lock()


def _lock_for(client) -> threading.Lock:
    with _serial_guard:
        lock = _serial_locks.get(client)
        if lock is None:
            lock = _serial_locks[client] = threading.Lock()
        return lock


def call_model(client: ChatClient, messages: list[Message]) -> str:
    """Invoke ``client.generate``, honouring a declared ``serial`` contract."""
    if getattr(client, "serial", False):
        with _lock_for(client):
            return client.generate(messages)
    return client.generate(messages)


def last_user_text(messages: Sequence[Message]) -> str:
    for message in reversed(messages):
        if message.get("role") == "user":
            return message.get("content", "")
    return ""


def extract_json_object(text: str) -> dict:
    """Pull the first JSON object out of a model reply (tolerates code fences)."""
    start = text.find("{")
    if start < 0:
        raise ValueError("no JSON object in reply")
    obj, _ = json.JSONDecoder().raw_decode(text[start:])
    if not isinstance(obj, dict):
        raise ValueError("reply is not a JSON object")
    return obj


# ---------------------------------------------------------------------------
# deterministic mocks


class ScriptedClient:
    """Replays a script of replies.

    ``script`` is either a sequence (consumed in order; an ``Exception``
    instance is raised instead of returned) or a callable receiving the
    message list. With ``repeat_last=True`` the final entry is replayed once
    the script runs out; otherwise exhaustion raises ``RuntimeError``.
    """

    def __init__(
        self,
        script: Sequence[str | BaseException] | Callable[[list[Message]], str],
        *,
        repeat_last: bool = False,
        serial: bool = False,
    ):
        self._script = script
        self._position = 0
        self._repeat_last = repeat_last
        self._lock = threading.Lock()
        self.serial = serial
        self.calls: list[list[Message]] = []

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def generate(self, messages: list[Message]) -> str:
        with self._lock:
            self.calls.append([dict(m) for m in messages])
            if callable(self._script):
                reply = self._script(messages)
            else:
                if self._position >= len(self._script):
                    if not (self._repeat_last and self._script):
                        raise RuntimeError("scripted client exhausted")
                    reply = self._script[-1]
                else:
                    reply = self._script[self._position]
                    self._position += 1
        if isinstance(reply, BaseException):
            raise reply
        return reply


class TableClient(ScriptedClient):
    """Answers by looking up the last user message in a table."""

    def __init__(self, table: Mapping[str, str], default: str | None = None, **kwargs):
        def reply(messages):
            text = last_user_text(messages)
            if text in table:
                return table[text]
            if default is None:
                raise KeyError(f"no scripted reply for {text!r}")
            return default

        super().__init__(reply, **kwargs)


class FailingClient(ScriptedClient):
    def __init__(self, exc: BaseException | None = None):
        error = exc or ConnectionError("model client unavailable")

        def reply(messages):
            raise error

        super().__init__(reply)


class HashEmbedder:
    """Deterministic hash-projection embedder.

    Each normalized token and character trigram is hashed to a seed for a
    fixed Gaussian direction; a text embeds to the unit-normalized weighted sum.
    Texts sharing vocabulary land close together, which is all the tests need.
    """

    def __init__(self, dimension: int = 64, trigram_weight: float = 0.5):
        self.dimension = dimension
        self.trigram_weight = trigram_weight
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        self.calls = 0

    def _direction(self, feature: str) -> np.ndarray:
        with self._lock:
            vec = self._cache.get(feature)
            if vec is None:
                seed = int.from_bytes(hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest(), "big")
                vec = np.random.default_rng(seed).standard_normal(self.dimension)
                self._cache[feature] = vec
            return vec

    def _embed_one(self, text: str) -> np.ndarray:
        total = np.zeros(self.dimension)
        for token in tokenize(text):
            total += self._direction("t:" + token)
            padded = f" {token} "
            for i in range(len(padded) - 2):
                total += self.trigram_weight * self._direction("c:" + padded[i : i + 3])
        norm = np.linalg.norm(total)
        return total / norm if norm > 0 else total

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        self.calls += 1
        return [self._embed_one(t) for t in texts]


class TableEmbedder:
    """Returns fixed vectors from a lookup keyed by exact text."""

    def __init__(self, table: Mapping[str, Sequence[float]], dimension: int, default: Sequence[float] | None = None):
        self.table = dict(table)
        self.dimension = dimension
        self.default = default if default is not None else [0.0] * dimension

    def embed(self, texts: Sequence[str]) -> list[Sequence[float]]:
        return [self.table.get(t, self.default) for t in texts]


class StaticModerationClient:
    def __init__(self, harmlessness: float = 5.0, cultural_alignment: float = 5.0, max_concurrency: int | None = None):
        self.scores = (harmlessness, cultural_alignment)
        self.max_concurrency = max_concurrency
        self.calls = 0

    def score(self, text: str) -> tuple[float, float]:
        self.calls += 1
        return self.scores


class KeywordModerationClient:
    """Offline stand-in for a trained scorer: 5/5 unless a flagged term appears."""

    def __init__(self, harmful_terms: Sequence[str] = (), misaligned_terms: Sequence[str] = (), max_concurrency: int | None = 8):
        self.harmful = [normalize(t) for t in harmful_terms]
        self.misaligned = [normalize(t) for t in misaligned_terms]
        self.max_concurrency = max_concurrency

    def score(self, text: str) -> tuple[float, float]:
        norm = normalize(text)
        harm = 1.5 if any(t and t in norm for t in self.harmful) else 5.0
        culture = 1.5 if any(t and t in norm for t in self.misaligned) else 5.0
        return harm, culture


class ExtractiveAnswerClient:
    """Builds a grounded-answer JSON reply directly from the evidence block.

    It follows the grounded-answer prompt contract (see
    ``groundqa.agent.grounding``): every evidence line in the prompt looks like
    ``[doc_id] text``; each becomes one Evidence entry citing that id.
    """

    _EVIDENCE_LINE = re.compile(r"^\[([^\]]+)\]\s*(.+)$")

    def __init__(self, max_items: int = 3):
        self.max_items = max_items
        self.calls = 0

    def generate(self, messages: list[Message]) -> str:
        self.calls += 1
        prompt = last_user_text(messages)
        items = []
        for line in prompt.splitlines():
            match = self._EVIDENCE_LINE.match(line.strip())
            if match:
                items.append({"text": match.group(2).strip(), "sources": [match.group(1)]})
        items = items[: self.max_items]
        if not items:
            return json.dumps({"ruling": "", "evidence": [], "explanation": "", "notes": ""})
        return json.dumps(
            {
                "ruling": "The retrieved sources below address the question directly.",
                "evidence": items,
                "explanation": "The answer is limited to what the cited sources state.",
                "notes": "Consult a qualified scholar for a binding ruling on personal circumstances.",
            },
            ensure_ascii=False,
        )


# ---------------------------------------------------------------------------
# HTTP clients (OpenAI-compatible)


class HttpChatClient:
    def __init__(self, base_url: str, model: str, api_key: str | None = None, timeout: float = 60.0, serial: bool = False):
        import httpx

        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._http = httpx.Client(base_url=base_url.rstrip("/"), headers=headers, timeout=timeout)
        self.model = model
        self.serial = serial

    def generate(self, messages: list[Message]) -> str:
        response = self._http.post("/chat/completions", json={"model": self.model, "messages": messages, "temperature": 0})
        response.raise_for_status()
        return response.json()["choices"][0]["message"]["content"]


class HttpEmbedder:
    def __init__(self, base_url: str, model: str, dimension: int, api_key: str | None = None, timeout: float = 60.0):
        import httpx

        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._http = httpx.Client(base_url=base_url.rstrip("/"), headers=headers, timeout=timeout)
        self.model = model
        self.dimension = dimension

    def embed(self, texts: Sequence[str]) -> list[Sequence[float]]:
        response = self._http.post("/embeddings", json={"model": self.model, "input": list(texts)})
        response.raise_for_status()
        data = sorted(response.json()["data"], key=lambda d: d["index"])
        return [d["embedding"] for d in data]


class HttpModerationClient:
    """Expects ``POST {base_url}/score`` returning ``{"harmlessness": x, "cultural_alignment": y}``."""

    def __init__(self, base_url: str, timeout: float = 30.0, max_concurrency: int | None = 8):
        import httpx

        self._http = httpx.Client(base_url=base_url.rstrip("/"), timeout=timeout)
        self.max_concurrency = max_concurrency

    def score(self, text: str) -> tuple[float, float]:
        response = self._http.post("/score", json={"text": text})
        response.raise_for_status()
        body = response.json()
        return float(body["harmlessness"]), float(body["cultural_alignment"])
