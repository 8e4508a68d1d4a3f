"""Post-generation validation of Quranic quotations.

Wire format
-----------
* A verse quoted by the model is wrapped in ``⟪`` and ``⟫`` (U+27EA, U+27EB).
* Without markers, a quotation in ``﴿…﴾``, ``«…»`` or ``"…"`` counts as a
  candidate verse when it directly follows an introducer such as
  ``قال تعالى`` or ``Allah says``; ``﴿…﴾`` always counts.
* A matched span is replaced by the canonical verse and followed by a
  citation, e.g. ``⟪…⟫ [Quran 2:255]``.
* A span that matches nothing well enough keeps its text and is wrapped as
  ``⟦unverifiable⟧…⟦/unverifiable⟧``.
"""

from __future__ import annotations

import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

from .clients import Embedder
from .errors import EmptyCorpus, UnbalancedMarkers
from .normalize import tokenize
from .retrieval import Corpus, CorpusDocument, CorpusIndex, search_hybrid, verify_sequence

OPEN = "⟪"  # ⟪
CLOSE = "⟫"  # ⟫
WARN_OPEN = "⟦unverifiable⟧"  # ⟦unverifiable⟧
WARN_CLOSE = "⟦/unverifiable⟧"
DEFAULT_THRESHOLD = 0.8
SHORTLIST = 10

_INTRODUCERS = (
    r"قال\s+(?:الله\s+)?تعالى",
    r"قوله\s+تعالى",
    r"يقول\s+(?:الله\s+)?(?:تعالى|سبحانه)",
    r"قال\s+الله\s+عز\s+وجل",
    r"(?:Allah|God)\s+(?:the\s+Exalted\s+)?(?:says|said)",
    r"the\s+(?:Qur'?an|Quran)\s+says",
)
# Ornate parentheses (U+FD3E, U+FD3F) are accepted in either logical order.
_CLOSERS = {'"': '"', "\u00ab": "\u00bb", "\u201c": "\u201d", "\ufd3f": "\ufd3e", "\ufd3e": "\ufd3f"}
_HEURISTIC = re.compile(
    r"(?:" + "|".join(_INTRODUCERS) + r")\s*[:\uff1a\u060c,]?\s*(?P<q>[\"\u00ab\u201c\ufd3e\ufd3f])",
    re.IGNORECASE,
)
_ORNATE = re.compile("(?:\ufd3f([^\ufd3e\ufd3f]+)\ufd3e|\ufd3e([^\ufd3e\ufd3f]+)\ufd3f)")


def citation_for(doc: CorpusDocument) -> str:
    return f" [Quran {doc.reference}]"


@dataclass(frozen=True)
class VerseSpan:
    start: int
    end: int
    raw: str
    marker_delimited: bool
    closer: str = CLOSE

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid span offsets {self.start}..{self.end}")


class Outcome(str, Enum):
    VERIFIED_EXACT = "verified_exact"
    CORRECTED = "corrected"
    UNVERIFIABLE = "unverifiable"


@dataclass(frozen=True)
class SpanResult:
    span: VerseSpan
    outcome: Outcome
    matched_reference: str | None
    similarity: float
    doc_id: str | None = None
    output_start: int = 0
    output_end: int = 0
    citation_start: int | None = None
    citation_end: int | None = None

    def __post_init__(self):
        if self.outcome is Outcome.CORRECTED and self.matched_reference is None:
            raise ValueError("a corrected span needs a matched reference")

    def to_dict(self) -> dict:
        return {
            "start": self.span.start,
            "end": self.span.end,
            "raw": self.span.raw,
            "marker_delimited": self.span.marker_delimited,
            "outcome": self.outcome.value,
            "matched_reference": self.matched_reference,
            "doc_id": self.doc_id,
            "similarity": self.similarity,
        }


@dataclass(frozen=True)
class ValidationReport:
    spans: tuple[SpanResult, ...] = ()
    anomalies: tuple[UnbalancedMarkers, ...] = ()
    threshold: float = DEFAULT_THRESHOLD

    @property
    def changed(self) -> bool:
        return any(r.outcome is not Outcome.VERIFIED_EXACT or r.citation_start is not None for r in self.spans)

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "spans": [r.to_dict() for r in self.spans],
            "anomalies": [{"offset": a.offset, "marker": a.marker, "message": str(a)} for a in self.anomalies],
        }


# ---------------------------------------------------------------------------
# detection


def scan(text: str) -> tuple[list[VerseSpan], list[UnbalancedMarkers]]:
    """Find candidate spans and record marker anomalies without raising."""
    spans: list[VerseSpan] = []
    anomalies: list[UnbalancedMarkers] = []
    i = 0
    pending: int | None = None
    while i < len(text):
        ch = text[i]
        if ch == OPEN:
            if pending is not None:
                anomalies.append(UnbalancedMarkers(pending, OPEN))
            pending = i
        elif ch == CLOSE:
            if pending is None:
                anomalies.append(UnbalancedMarkers(i, CLOSE))
            elif i == pending + 1:
                anomalies.append(UnbalancedMarkers(pending, OPEN + CLOSE))
                pending = None
            else:
                spans.append(VerseSpan(pending + 1, i, text[pending + 1 : i], True, CLOSE))
                pending = None
        i += 1
    if pending is not None:
        anomalies.append(UnbalancedMarkers(pending, OPEN))

    taken = [(s.start - 1, s.end + 1) for s in spans]

    def free(a: int, b: int) -> bool:
        return all(b <= lo or a >= hi for lo, hi in taken)

    heuristic: list[VerseSpan] = []
    for match in _HEURISTIC.finditer(text):
        opener_at = match.start("q")
        closer = _CLOSERS[match.group("q")]
        end = text.find(closer, opener_at + 1)
        if end > opener_at + 1 and free(opener_at, end + 1):
            heuristic.append(VerseSpan(opener_at + 1, end, text[opener_at + 1 : end], False, closer))
            taken.append((opener_at, end + 1))
    for match in _ORNATE.finditer(text):
        group = 1 if match.group(1) is not None else 2
        if free(match.start(), match.end()):
            heuristic.append(VerseSpan(match.start(group), match.end(group), match.group(group), False, text[match.end() - 1]))
            taken.append((match.start(), match.end()))
    return spans + sorted(heuristic, key=lambda s: s.start), anomalies


def detect_spans(text: str) -> list[VerseSpan]:
    """Marker-delimited spans first, then heuristic ones; never overlapping."""
    return scan(text)[0]


# ---------------------------------------------------------------------------
# matching


def _unwrap(raw: str) -> tuple[str, bool]:
    core = raw.strip()
    if core.startswith(WARN_OPEN) and core.endswith(WARN_CLOSE):
        return core[len(WARN_OPEN) : -len(WARN_CLOSE)], True
    return raw, False


def match_verse(
    span: VerseSpan | str, index: CorpusIndex, embedder: Embedder, shortlist: int = SHORTLIST, threshold: float = DEFAULT_THRESHOLD
) -> tuple[CorpusDocument | None, float]:
    """Best verse for a span and its verify_sequence similarity.

    The hybrid shortlist is only a speed-up: when no shortlisted verse clears
    ``threshold`` the whole Quran corpus is scanned, so a match never depends
    on the embedder's recall.
    """
    raw = span.raw if isinstance(span, VerseSpan) else span
    raw, _ = _unwrap(raw)
    verses = [d for d in index.docs if d.corpus is Corpus.QURAN]
    if not verses:
        raise EmptyCorpus("no Quran verses indexed")
    if not tokenize(raw):
        return None, 0.0

    def best_of(docs: Sequence[CorpusDocument]) -> tuple[CorpusDocument | None, float]:
        best, score = None, -1.0
        for doc in docs:
            s = verify_sequence(raw, doc.text)
            if s > score:
                best, score = doc, s
        return best, score

    hits = search_hybrid(index, raw, shortlist, embedder, corpus=Corpus.QURAN)
    best, score = best_of([index.get(h.doc_id) for h in hits])
    if best is None or score < threshold:
        best, score = best_of(verses)
    return best, max(score, 0.0)


# ---------------------------------------------------------------------------
# replacement


def validate_and_replace(
    text: str, index: CorpusIndex, embedder: Embedder, threshold: float = DEFAULT_THRESHOLD
) -> tuple[str, ValidationReport]:
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    spans, anomalies = scan(text)
    if not spans:
        return text, ValidationReport((), tuple(anomalies), threshold)

    out: list[str] = []
    length = 0
    cursor = 0
    results: list[SpanResult] = []
    for span in sorted(spans, key=lambda s: s.start):
        gap = text[cursor : span.start]
        out.append(gap)
        length += len(gap)
        doc, similarity = match_verse(span, index, embedder, threshold=threshold)
        inner, flagged = _unwrap(span.raw)
        citation_start = citation_end = None
        after = span.end + len(span.closer)
        if doc is not None and similarity >= threshold:
            outcome = Outcome.VERIFIED_EXACT if inner == doc.text else Outcome.CORRECTED
            replacement = doc.text
            citation = citation_for(doc)
            tail = span.closer
            if not text.startswith(citation, after):
                tail += citation
            out_start = length
            out.append(replacement + tail)
            length += len(replacement) + len(tail)
            if len(tail) > len(span.closer):
                citation_start, citation_end = out_start + len(replacement) + len(span.closer), length
            result = SpanResult(
                span, outcome, doc.reference, similarity, doc.id, out_start, out_start + len(replacement),
                citation_start, citation_end,
            )
        else:
            replacement = span.raw if flagged else f"{WARN_OPEN}{span.raw}{WARN_CLOSE}"
            out_start = length
            out.append(replacement + span.closer)
            length += len(replacement) + len(span.closer)
            result = SpanResult(
                span, Outcome.UNVERIFIABLE, None, similarity, None, out_start, out_start + len(replacement)
            )
        results.append(result)
        cursor = after
    out.append(text[cursor:])
    return "".join(out), ValidationReport(tuple(results), tuple(anomalies), threshold)
