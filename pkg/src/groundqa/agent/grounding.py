"""Structured grounded answers with deterministic ``[doc_id]`` citation tags.

Prompt contract: the user message lists one evidence item per line as
``[doc_id] text``; the model replies with a JSON object
``{"ruling": str, "evidence": [{"text": str, "sources": [doc_id, ...]}],
"explanation": str, "notes": str}``. Evidence entries citing ids that were
not supplied are dropped, so every tag resolves.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

from ..clients import ChatClient, call_model, extract_json_object
from ..retrieval import Corpus, CorpusDocument
from ..templates import load_templates, pick_locale, template

log = logging.getLogger(__name__)

GROUNDED_ANSWER_PROMPT = (
    "Answer the question using only the numbered evidence. Reply with one JSON object with keys "
    "ruling (the direct answer), evidence (a list of objects, each with text quoting or paraphrasing "
    "one piece of evidence and sources listing the bracketed ids it comes from), explanation and notes. "
    "Keep the ruling separate from the evidence. Quote Quran verses exactly. If the evidence does not "
    "answer the question, return an empty ruling."
)


@dataclass(frozen=True)
class EvidenceItem:
    doc_id: str
    text: str
    reference: str = ""
    corpus: str = ""

    @classmethod
    def from_document(cls, doc: CorpusDocument) -> "EvidenceItem":
        return cls(doc.id, doc.text, doc.reference, doc.corpus.value)


@dataclass(frozen=True)
class EvidenceEntry:
    text: str
    sources: tuple[str, ...]

    def __post_init__(self):
        if not self.sources:
            raise ValueError("evidence entries need at least one citation")

    def render(self) -> str:
        return self.text + " " + "".join(f"[{s}]" for s in self.sources)


@dataclass(frozen=True)
class GroundedAnswer:
    ruling: str = ""
    evidence: tuple[EvidenceEntry, ...] = ()
    explanation: str = ""
    notes: str = ""
    abstained: bool = False

    @property
    def citations(self) -> list[tuple[str, str]]:
        return [(entry.text, source) for entry in self.evidence for source in entry.sources]

    def render(self, locale: str = "en") -> str:
        headers = load_templates()["sections"][pick_locale(locale)]
        parts = [f"{headers['ruling']}: {self.ruling}"]
        if self.evidence:
            parts.append(f"{headers['evidence']}:\n" + "\n".join(f"- {e.render()}" for e in self.evidence))
        if self.explanation:
            parts.append(f"{headers['explanation']}: {self.explanation}")
        if self.notes:
            parts.append(f"{headers['notes']}: {self.notes}")
        return "\n\n".join(parts)

    def to_dict(self) -> dict[str, Any]:
        return {
            "ruling": self.ruling,
            "evidence": [{"text": e.text, "sources": list(e.sources)} for e in self.evidence],
            "explanation": self.explanation,
            "notes": self.notes,
            "abstained": self.abstained,
        }


def abstention(locale: str = "en", note: str = "") -> GroundedAnswer:
    return GroundedAnswer(ruling=template("abstention", locale), notes=note, abstained=True)


def _evidence_line(item: EvidenceItem) -> str:
    text = " ".join(item.text.split())
    if item.corpus == Corpus.QURAN.value:
        text = f"⟪{text}⟫"
    return f"[{item.doc_id}] {text}"


def assemble_grounded_answer(
    question: str,
    evidence: Sequence[EvidenceItem | CorpusDocument],
    model_client: ChatClient | None,
    locale: str = "en",
) -> GroundedAnswer:
    items = [e if isinstance(e, EvidenceItem) else EvidenceItem.from_document(e) for e in evidence]
    if not items:
        return abstention(locale)
    if model_client is None:
        return abstention(locale, "no answer model configured")
    prompt = f"Question: {question}\n\nEvidence:\n" + "\n".join(_evidence_line(i) for i in items)
    messages = [{"role": "system", "content": GROUNDED_ANSWER_PROMPT}, {"role": "user", "content": prompt}]
    try:
        reply = extract_json_object(call_model(model_client, messages))
    except Exception as exc:  # noqa: BLE001 - degraded path is an abstention
        log.warning("grounded answer failed: %s", exc)
        return abstention(locale, f"answer model unavailable ({type(exc).__name__})")

    known = {i.doc_id for i in items}
    entries: list[EvidenceEntry] = []
    for raw in reply.get("evidence") or []:
        if not isinstance(raw, dict) or not isinstance(raw.get("text"), str) or not raw["text"].strip():
            continue
        sources = raw.get("sources") or []
        if isinstance(sources, str):
            sources = [sources]
        kept = tuple(dict.fromkeys(s for s in sources if isinstance(s, str) and s in known))
        if kept:
            entries.append(EvidenceEntry(raw["text"].strip(), kept))
    ruling = reply.get("ruling")
    if not isinstance(ruling, str) or not ruling.strip():
        answer = abstention(locale)
        return GroundedAnswer(answer.ruling, tuple(entries), "", answer.notes, True)

    def text_field(key: str) -> str:
        value = reply.get(key)
        return value.strip() if isinstance(value, str) else ""

    return GroundedAnswer(ruling.strip(), tuple(entries), text_field("explanation"), text_field("notes"))
