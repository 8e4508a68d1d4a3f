from __future__ import annotations

import pytest

from groundqa.quran_guard import WARN_CLOSE, WARN_OPEN, Outcome, citation_for, detect_spans, scan, validate_and_replace


@pytest.fixture(scope="module")
def verse(index):
    return next(d for d in index.docs if d.corpus.value == "quran" and len(d.text.split()) >= 6)


def test_exact_verse_gets_a_citation_once(index, embedder, verse):
    text = f"Consider: ⟪{verse.text}⟫ and reflect."
    out, report = validate_and_replace(text, index, embedder)
    assert out == f"Consider: ⟪{verse.text}⟫{citation_for(verse)} and reflect."
    assert report.spans[0].outcome is Outcome.VERIFIED_EXACT
    again, report2 = validate_and_replace(out, index, embedder)
    assert again == out and not report2.changed


def test_corrupted_verse_is_corrected(index, embedder, verse):
    words = verse.text.split()
    words[2] = "خطأ"
    out, report = validate_and_replace(f"⟪{' '.join(words)}⟫", index, embedder)
    assert out == f"⟪{verse.text}⟫{citation_for(verse)}"
    assert report.spans[0].outcome is Outcome.CORRECTED and report.spans[0].matched_reference == verse.reference


def test_unmatched_span_is_flagged_idempotently(index, embedder):
    text = "⟪this sentence is not from the Quran at all⟫"
    out, report = validate_and_replace(text, index, embedder)
    assert out == f"⟪{WARN_OPEN}this sentence is not from the Quran at all{WARN_CLOSE}⟫"
    assert report.spans[0].outcome is Outcome.UNVERIFIABLE
    assert validate_and_replace(out, index, embedder)[0] == out


def test_text_without_spans_is_unchanged(index, embedder):
    text = "No verses here, just ⟫ a stray marker."
    out, report = validate_and_replace(text, index, embedder)
    assert out == text and report.spans == () and len(report.anomalies) == 1


def test_scan_reports_marker_anomalies():
    spans, anomalies = scan("⟪a ⟪b⟫ c⟫ ⟪⟫ ⟪open")
    assert [s.raw for s in spans] == ["b"]
    assert [a.marker for a in anomalies] == ["⟪", "⟫", "⟪⟫", "⟪"]


def test_heuristic_detection(verse):
    spans = detect_spans(f"قال تعالى: «{verse.text}» صدق الله")
    assert len(spans) == 1 and spans[0].raw == verse.text and not spans[0].marker_delimited
    ornate = detect_spans(f"﴿{verse.text}﴾")
    assert ornate[0].raw == verse.text
    assert detect_spans("He said «hello»") == []


def test_threshold_validation(index, embedder):
    with pytest.raises(ValueError):
        validate_and_replace("x", index, embedder, threshold=0)
