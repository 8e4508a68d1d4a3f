"""Hybrid lexical + dense retrieval over the bundled scripture and knowledge corpora.

The lexical channel is Okapi BM25 over normalized tokens; the dense channel
is exhaustive cosine similarity against embedder vectors. The two ranked
lists are merged with reciprocal rank fusion, and returned canonical texts
can be checked against a candidate with :func:`verify_sequence`.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .clients import Embedder
from .config import data_path, load_jsonl
from .errors import DuplicateId, EmbedderDimensionMismatch, EmptyCorpus, EmptyQuery, EmptyText, InvalidInput
from .normalize import tokenize

log = logging.getLogger(__name__)

BM25_K1 = 1.5
BM25_B = 0.75
RRF_K = 60
CHANNEL_DEPTH = 20  # per-channel list length fed to fusion


class Corpus(str, Enum):
    QURAN = "quran"
    HADITH = "hadith"
    SUPPLICATION = "supplication"
    FIQH = "fiqh"
    GENERAL = "general"


CITED_CORPORA = {Corpus.QURAN, Corpus.HADITH, Corpus.SUPPLICATION}
# metadata fields that are searchable alongside the text (never quoted back)
SEARCH_FIELDS = ("title", "topic", "translation", "keywords", "surah_name")


@dataclass(frozen=True)
class CorpusDocument:
    id: str
    corpus: Corpus
    text: str
    reference: str = ""
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "corpus", Corpus(self.corpus))
        if not self.id:
            raise InvalidInput("document id must be non-empty")
        if not self.text or not self.text.strip():
            raise InvalidInput(f"document {self.id} has empty text")
        if self.corpus in CITED_CORPORA and not self.reference.strip():
            raise InvalidInput(f"document {self.id} in {self.corpus.value} needs a reference")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "CorpusDocument":
        return cls(
            id=str(raw["id"]),
            corpus=Corpus(raw["corpus"]),
            text=raw["text"],
            reference=raw.get("reference", ""),
            metadata=dict(raw.get("metadata", {})),
        )

    @property
    def search_text(self) -> str:
        parts = [self.text]
        for key in SEARCH_FIELDS:
            value = self.metadata.get(key)
            if isinstance(value, str):
                parts.append(value)
            elif isinstance(value, (list, tuple)):
                parts.extend(v for v in value if isinstance(v, str))
        return " ".join(parts)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "corpus": self.corpus.value,
            "text": self.text,
            "reference": self.reference,
            "metadata": dict(self.metadata),
        }


class Channel(str, Enum):
    FULLTEXT = "fulltext"
    SEMANTIC = "semantic"
    FUSED = "fused"


@dataclass(frozen=True)
class RankedHit:
    doc_id: str
    score: float
    rank: int
    channel: Channel


def rank_scores(scores: Mapping[str, float], channel: Channel, k: int | None = None) -> list[RankedHit]:
    """Turn a score map into a gap-free ranked list (ties broken by doc id)."""
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    if k is not None:
        ordered = ordered[:k]
    return [RankedHit(doc_id, float(score), i, channel) for i, (doc_id, score) in enumerate(ordered, 1)]


# ---------------------------------------------------------------------------
# index


class CorpusIndex:
    """Immutable after construction; build it with :func:`index_corpus`."""

    def __init__(self, docs: Sequence[CorpusDocument], vectors: np.ndarray, dimension: int):
        self.docs: tuple[CorpusDocument, ...] = tuple(docs)
        self.by_id: dict[str, CorpusDocument] = {d.id: d for d in self.docs}
        self.dimension = dimension
        self.tokens: tuple[tuple[str, ...], ...] = tuple(tuple(tokenize(d.search_text)) for d in self.docs)
        lengths = np.array([len(t) for t in self.tokens], dtype=float)
        self._lengths = lengths
        self._avgdl = float(lengths.mean()) if len(lengths) else 0.0
        postings: dict[str, dict[int, int]] = {}
        for i, toks in enumerate(self.tokens):
            for token, tf in Counter(toks).items():
                postings.setdefault(token, {})[i] = tf
        self._postings = postings
        n = len(self.docs)
        self._idf = {t: math.log(1 + (n - len(p) + 0.5) / (len(p) + 0.5)) for t, p in postings.items()}
        norms = np.linalg.norm(vectors, axis=1, keepdims=True) if len(vectors) else np.zeros((0, 1))
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(norms > 0, vectors / np.where(norms > 0, norms, 1), 0.0)
        unit.setflags(write=False)
        self._vectors = unit

    def __len__(self) -> int:
        return len(self.docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.by_id

    def get(self, doc_id: str) -> CorpusDocument:
        return self.by_id[doc_id]

    def _mask(self, corpus: Corpus | str | None, where: Mapping[str, Any] | None) -> list[int]:
        return [i for i, d in enumerate(self.docs) if _matches(d, corpus, where)]

    def bm25(self, query_tokens: Sequence[str], candidates: Iterable[int] | None = None) -> dict[int, float]:
        allowed = set(candidates) if candidates is not None else None
        scores: dict[int, float] = {}
        for token in set(query_tokens):
            posting = self._postings.get(token)
            if not posting:
                continue
            idf = self._idf[token]
            for i, tf in posting.items():
                if allowed is not None and i not in allowed:
                    continue
                denom = tf + BM25_K1 * (1 - BM25_B + BM25_B * self._lengths[i] / self._avgdl)
                scores[i] = scores.get(i, 0.0) + idf * tf * (BM25_K1 + 1) / denom
        return scores

    def cosine(self, query_vector: np.ndarray, candidates: Sequence[int]) -> dict[int, float]:
        norm = np.linalg.norm(query_vector)
        if norm == 0 or not candidates:
            return {i: 0.0 for i in candidates}
        sims = self._vectors[list(candidates)] @ (query_vector / norm)
        return {i: float(s) for i, s in zip(candidates, sims)}


def _matches(doc: CorpusDocument, corpus: Corpus | str | None, where: Mapping[str, Any] | None) -> bool:
    if corpus is not None and doc.corpus != Corpus(corpus):
        return False
    for key, wanted in (where or {}).items():
        value = doc.metadata.get(key)
        if callable(wanted):
            if not wanted(value):
                return False
        elif isinstance(wanted, (list, tuple, set, frozenset)):
            if value not in wanted:
                return False
        elif value != wanted:
            return False
    return True


def _embed(embedder: Embedder, texts: Sequence[str]) -> np.ndarray:
    vectors = embedder.embed(list(texts))
    if len(vectors) != len(texts):
        raise EmbedderDimensionMismatch(f"embedder returned {len(vectors)} vectors for {len(texts)} texts")
    dims = {len(v) for v in vectors}
    declared = getattr(embedder, "dimension", None)
    if len(dims) > 1 or (declared is not None and dims and dims != {declared}):
        raise EmbedderDimensionMismatch(f"embedder declared dimension {declared}, returned {sorted(dims)}")
    if not vectors:
        return np.zeros((0, declared or 0))
    return np.asarray(vectors, dtype=float)


def index_corpus(docs: Sequence[CorpusDocument], embedder: Embedder, batch_size: int = 128) -> CorpusIndex:
    seen: set[str] = set()
    for doc in docs:
        if doc.id in seen:
            raise DuplicateId(f"duplicate document id {doc.id!r}")
        seen.add(doc.id)
    dimension = getattr(embedder, "dimension", None)
    chunks = []
    for start in range(0, len(docs), batch_size):
        block = _embed(embedder, [d.search_text for d in docs[start : start + batch_size]])
        if dimension is None:
            dimension = block.shape[1]
        if block.shape[1] != dimension:
            raise EmbedderDimensionMismatch(f"batch at {start} has dimension {block.shape[1]}, expected {dimension}")
        chunks.append(block)
    vectors = np.vstack(chunks) if chunks else np.zeros((0, dimension or 0))
    log.info("indexed %d documents (dimension %s)", len(docs), dimension)
    return CorpusIndex(docs, vectors, int(dimension or 0))


# ---------------------------------------------------------------------------
# search


def fuse_rrf(lists: Sequence[Sequence[RankedHit]], k_const: float = RRF_K) -> list[RankedHit]:
    """Reciprocal rank fusion: score(d) = sum over lists of 1 / (k_const + rank_d).

    Scores are accumulated as exact rationals so that ties are real ties and
    the doc-id tie-break is deterministic.
    """
    if k_const <= 0:
        raise InvalidInput("k_const must be positive")
    k = Fraction(k_const)
    totals: dict[str, Fraction] = {}
    for hits in lists:
        for hit in hits:
            totals[hit.doc_id] = totals.get(hit.doc_id, Fraction(0)) + 1 / (k + hit.rank)
    ordered = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    return [RankedHit(doc_id, float(score), i, Channel.FUSED) for i, (doc_id, score) in enumerate(ordered, 1)]


def search_fulltext(index: CorpusIndex, query: str, k: int, *, corpus=None, where=None) -> list[RankedHit]:
    tokens = tokenize(query)
    if not tokens:
        raise EmptyQuery("query is empty after normalization")
    scores = index.bm25(tokens, index._mask(corpus, where) if (corpus or where) else None)
    return rank_scores({index.docs[i].id: s for i, s in scores.items()}, Channel.FULLTEXT, k)


def search_semantic(index: CorpusIndex, query: str, k: int, embedder: Embedder, *, corpus=None, where=None) -> list[RankedHit]:
    if not query or not query.strip():
        raise EmptyQuery("query is empty")
    (qvec,) = _embed(embedder, [query])
    if len(qvec) != index.dimension:
        raise EmbedderDimensionMismatch(f"query vector has dimension {len(qvec)}, index has {index.dimension}")
    sims = index.cosine(qvec, index._mask(corpus, where))
    return rank_scores({index.docs[i].id: s for i, s in sims.items()}, Channel.SEMANTIC, k)


def search_hybrid(
    index: CorpusIndex,
    query: str,
    k: int,
    embedder: Embedder,
    *,
    corpus: Corpus | str | None = None,
    where: Mapping[str, Any] | None = None,
    k_const: float = RRF_K,
    depth: int | None = None,
) -> list[RankedHit]:
    """Both channels to ``depth`` (default max(k, CHANNEL_DEPTH)), fused, truncated to the top ``k``."""
    if k < 1:
        raise InvalidInput("k must be >= 1")
    if not query or not query.strip() or not tokenize(query):
        raise EmptyQuery("query is empty")
    depth = max(k, depth if depth is not None else CHANNEL_DEPTH)
    lexical = search_fulltext(index, query, depth, corpus=corpus, where=where)
    semantic = search_semantic(index, query, depth, embedder, corpus=corpus, where=where)
    return fuse_rrf([lexical, semantic], k_const)[:k]


def filter_documents(
    index: CorpusIndex,
    corpus: Corpus | str | None = None,
    where: Mapping[str, Any] | None = None,
    predicate: Callable[[CorpusDocument], bool] | None = None,
) -> list[CorpusDocument]:
    """Structured metadata lookup (e.g. every verse of surah 2 with ayah <= 5)."""
    docs = [index.docs[i] for i in index._mask(corpus, where)]
    return [d for d in docs if predicate is None or predicate(d)]


# ---------------------------------------------------------------------------
# sequence matching


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def verify_sequence(candidate: str, canonical: str) -> float:
    """Token-level similarity 2L / (|a| + |b|), L the LCS length over normalized tokens."""
    a, b = tokenize(candidate), tokenize(canonical)
    if not a or not b:
        raise EmptyText("both texts must contain at least one token after normalization")
    if a == b:
        return 1.0
    return 2 * lcs_length(a, b) / (len(a) + len(b))


MIN_EXCERPT_TOKENS = 5


def verify_excerpt(candidate: str, canonical: str) -> float:
    """Best verify_sequence ratio of ``candidate`` against any same-length window of ``canonical``.

    Lets a quotation of part of a long narration verify; candidates shorter
    than MIN_EXCERPT_TOKENS fall back to whole-text comparison.
    """
    a, b = tokenize(candidate), tokenize(canonical)
    if not a or not b:
        raise EmptyText("both texts must contain at least one token after normalization")
    whole = 1.0 if a == b else 2 * lcs_length(a, b) / (len(a) + len(b))
    n = len(a)
    if n < MIN_EXCERPT_TOKENS or n >= len(b):
        return whole
    best = whole
    for start in range(len(b) - n + 1):
        window = b[start : start + n]
        best = max(best, 1.0 if window == a else lcs_length(a, window) / n)
        if best == 1.0:
            break
    return best


@dataclass(frozen=True)
class Verification:
    document: CorpusDocument | None
    similarity: float
    verified: bool
    excerpt: bool = False  # matched part of a longer narration

    def to_dict(self) -> dict[str, Any]:
        return {
            "doc_id": self.document.id if self.document else None,
            "reference": self.document.reference if self.document else None,
            "similarity": self.similarity,
            "verified": self.verified,
            "excerpt": self.excerpt,
        }


def best_match(
    text: str, index: CorpusIndex, embedder: Embedder, *, corpus=None, shortlist: int = 10, score=verify_sequence
) -> tuple[CorpusDocument, float]:
    """Shortlist with hybrid search, then pick the highest ``score`` (verify_sequence by default)."""
    if not any(corpus is None or d.corpus == Corpus(corpus) for d in index.docs):
        raise EmptyCorpus("no documents to match against")
    hits = search_hybrid(index, text, shortlist, embedder, corpus=corpus)
    best, best_score = None, -1.0
    for hit in hits:
        doc = index.get(hit.doc_id)
        value = score(text, doc.text)
        if value > best_score:
            best, best_score = doc, value
    if best is None:
        raise EmptyCorpus("no candidates found")
    return best, best_score


def verify_hadith(text: str, index: CorpusIndex, embedder: Embedder, threshold: float = 0.85) -> Verification:
    """Check a quoted hadith against the collection; verified iff similarity >= threshold.

    A quotation of part of a narration is scored against its best window.
    """
    try:
        doc, score = best_match(text, index, embedder, corpus=Corpus.HADITH, score=verify_excerpt)
    except (EmptyQuery, EmptyText):
        return Verification(None, 0.0, False)
    excerpt = score > verify_sequence(text, doc.text)
    return Verification(doc, score, score >= threshold, excerpt)


# ---------------------------------------------------------------------------
# corpus files


def load_corpus(path: str | Path) -> list[CorpusDocument]:
    return [CorpusDocument.from_dict(rec) for rec in load_jsonl(path)]


def write_corpus(docs: Iterable[CorpusDocument], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_dict(), ensure_ascii=False) + "\n")


DEFAULT_CORPORA = {c.value: f"corpora/{c.value}.jsonl" for c in Corpus}


def load_corpora(paths: Mapping[str, str] | None = None) -> list[CorpusDocument]:
    docs: list[CorpusDocument] = []
    for name, path in (paths or DEFAULT_CORPORA).items():
        loaded = load_corpus(path)
        for doc in loaded:
            if doc.corpus.value != name:
                raise InvalidInput(f"{path}: document {doc.id} declares corpus {doc.corpus.value}, expected {name}")
        docs.extend(loaded)
    return docs


def corpus_summary(docs: Iterable[CorpusDocument]) -> dict[str, int]:
    return dict(sorted(Counter(d.corpus.value for d in docs).items()))


def default_corpus_dir() -> Path:
    return data_path("corpora")
