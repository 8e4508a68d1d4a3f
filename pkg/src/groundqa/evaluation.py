"""Tool-calling and routing metrics, plus Fleiss' kappa.

Precision and recall are computed one-vs-rest over function names, with
"no call" treated as a class of its own. Per-class values are aggregated by
support (the number of gold instances of the class). All arithmetic is exact
(:class:`fractions.Fraction`); floats appear only in serialized reports.

Conventions
-----------
* A class that is never predicted has precision 0.
* A class that never occurs in gold has recall 0 and weight 0.
* ArgA counts exact matches after :func:`normalize_call` over the records
  whose gold is a tool call.
"""

from __future__ import annotations

import datetime as dt
import json
import re
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path
from typing import Any, Union

import numpy as np

from .agent.protocol import NO_CALL_TAG, NoToolCall, ToolCall
from .errors import DegenerateAgreement, EmptyDataset, LengthMismatch, NoPositiveCases

NO_CALL = NO_CALL_TAG
Call = Union[ToolCall, NoToolCall]


@dataclass(frozen=True)
class EvalRecord:
    id: str
    gold: Call
    predicted: Call
    language: str = ""
    dataset: str = ""
    multi_turn: bool = False

    @property
    def function_call(self) -> bool:
        return isinstance(self.gold, ToolCall)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "EvalRecord":
        return cls(
            id=str(raw["id"]),
            gold=_call_from_json(raw.get("gold")),
            predicted=_call_from_json(raw.get("predicted")),
            language=raw.get("language", ""),
            dataset=raw.get("dataset", ""),
            multi_turn=bool(raw.get("multi_turn", False)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "gold": _call_to_json(self.gold),
            "predicted": _call_to_json(self.predicted),
            "language": self.language,
            "dataset": self.dataset,
            "fc": self.function_call,
            "multi_turn": self.multi_turn,
        }


def _call_from_json(value: Any) -> Call:
    if value is None or value == NO_CALL:
        return NoToolCall()
    return ToolCall(value["name"], value.get("arguments", {}))


def _call_to_json(call: Call) -> dict | None:
    return call.to_dict() if isinstance(call, ToolCall) else None


def class_of(call: Call) -> str:
    return call.name if isinstance(call, ToolCall) else NO_CALL


# ---------------------------------------------------------------------------
# argument normalization

_WS = re.compile(r"\s+")
_NUMERIC = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_YMD = re.compile(r"(\d{4})[-/._](\d{1,2})[-/._](\d{1,2})")
_MONTHS = {
    name: i
    for i, names in enumerate(
        [
            ("january", "jan"), ("february", "feb"), ("march", "mar"), ("april", "apr"), ("may",),
            ("june", "jun"), ("july", "jul"), ("august", "aug"), ("september", "sep", "sept"),
            ("october", "oct"), ("november", "nov"), ("december", "dec"),
        ],
        1,
    )
    for name in names
}
_MONTH_RE = "|".join(sorted(_MONTHS, key=len, reverse=True))
_MDY = re.compile(rf"({_MONTH_RE})\.? (\d{{1,2}})(?:st|nd|rd|th)?,? (\d{{4}})")
_DMY = re.compile(rf"(\d{{1,2}})(?:st|nd|rd|th)? (?:of )?({_MONTH_RE})\.?,? (\d{{4}})")

# Recognized date patterns (matched against the whole lowercased value):
#   2024-01-15, 2024/1/15, 2024.01.15, 2024_01_15   year-first numeric
#   january 15, 2024 / jan 15 2024 / jan. 15th, 2024  month-name first
#   15 january 2024 / 15th of jan, 2024               day first, month by name
# Day-first all-numeric forms (15/01/2024) are ambiguous and left unchanged.
DATE_PATTERNS = ("YYYY-MM-DD", "YYYY/MM/DD", "YYYY.MM.DD", "YYYY_MM_DD", "Month D, YYYY", "D Month YYYY")


def _iso(year: str, month: int | str, day: str) -> str | None:
    try:
        return dt.date(int(year), int(month), int(day)).isoformat()
    except ValueError:
        return None


def canonical_date(text: str) -> str | None:
    if m := _YMD.fullmatch(text):
        return _iso(m.group(1), m.group(2), m.group(3))
    if m := _MDY.fullmatch(text):
        return _iso(m.group(3), _MONTHS[m.group(1)], m.group(2))
    if m := _DMY.fullmatch(text):
        return _iso(m.group(3), _MONTHS[m.group(2)], m.group(1))
    return None


def canonical_number(value: Decimal) -> str:
    """Plain decimal notation with no leading or trailing zeros ("-0" -> "0")."""
    if value == 0:
        return "0"
    text = format(value.normalize(), "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text


def canonical_string(text: str) -> str:
    text = _WS.sub(" ", text).strip().lower()
    date = canonical_date(text)
    if date is not None:
        return date
    if _NUMERIC.fullmatch(text):
        try:
            return canonical_number(Decimal(text))
        except InvalidOperation:
            return text
    return text


def canonical_value(value: Any) -> Any:
    if isinstance(value, str):
        return canonical_string(value)
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, (int, float)):
        # JSON numbers and numeric strings compare equal: 5, 5.0 and "5" all become "5"
        return canonical_number(Decimal(repr(value)) if isinstance(value, float) else Decimal(value))
    if isinstance(value, (list, tuple)):
        return [canonical_value(v) for v in value]
    if isinstance(value, Mapping):
        return {k: canonical_value(value[k]) for k in sorted(value)}
    return value


def normalize_call(call: Call) -> Call:
    if isinstance(call, NoToolCall):
        return call
    name = _WS.sub(" ", call.name).strip().lower()
    return ToolCall(name, canonical_value(dict(call.arguments)))


def calls_match(a: Call, b: Call) -> bool:
    return normalize_call(a) == normalize_call(b)


# ---------------------------------------------------------------------------
# counting


@dataclass
class Counts:
    """Sufficient statistics; partitions merge with ``+``."""

    gold: Counter = field(default_factory=Counter)
    predicted: Counter = field(default_factory=Counter)
    true_positive: Counter = field(default_factory=Counter)
    positives: int = 0
    exact_matches: int = 0
    records: int = 0

    def add(self, record: EvalRecord) -> None:
        g, p = class_of(record.gold), class_of(record.predicted)
        self.gold[g] += 1
        self.predicted[p] += 1
        if g == p:
            self.true_positive[g] += 1
        if isinstance(record.gold, ToolCall):
            self.positives += 1
            if isinstance(record.predicted, ToolCall) and calls_match(record.gold, record.predicted):
                self.exact_matches += 1
        self.records += 1

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(
            self.gold + other.gold,
            self.predicted + other.predicted,
            self.true_positive + other.true_positive,
            self.positives + other.positives,
            self.exact_matches + other.exact_matches,
            self.records + other.records,
        )

    @classmethod
    def of(cls, records: Iterable[EvalRecord]) -> "Counts":
        counts = cls()
        for record in records:
            counts.add(record)
        return counts


@dataclass(frozen=True)
class ClassMetrics:
    precision: Fraction
    recall: Fraction
    support: int
    true_positive: int
    false_positive: int
    false_negative: int


@dataclass(frozen=True)
class MetricReport:
    per_tool: Mapping[str, ClassMetrics]
    weighted_precision: Fraction
    weighted_recall: Fraction
    arg_accuracy: Fraction | None
    counts: Counts

    @classmethod
    def from_counts(cls, counts: Counts) -> "MetricReport":
        if counts.records == 0:
            raise EmptyDataset("no records to score")
        per_tool = {}
        for name in sorted(set(counts.gold) | set(counts.predicted)):
            tp = counts.true_positive[name]
            predicted, support = counts.predicted[name], counts.gold[name]
            per_tool[name] = ClassMetrics(
                precision=Fraction(tp, predicted) if predicted else Fraction(0),
                recall=Fraction(tp, support) if support else Fraction(0),
                support=support,
                true_positive=tp,
                false_positive=predicted - tp,
                false_negative=support - tp,
            )
        total = counts.records
        wp = sum((Fraction(m.support, total) * m.precision for m in per_tool.values()), Fraction(0))
        wr = sum((Fraction(m.support, total) * m.recall for m in per_tool.values()), Fraction(0))
        arga = Fraction(counts.exact_matches, counts.positives) if counts.positives else None
        return cls(per_tool, wp, wr, arga, counts)

    def to_dict(self) -> dict[str, Any]:
        return {
            "records": self.counts.records,
            "positive_cases": self.counts.positives,
            "weighted_precision": float(self.weighted_precision),
            "weighted_recall": float(self.weighted_recall),
            "arg_accuracy": None if self.arg_accuracy is None else float(self.arg_accuracy),
            "per_tool": {
                name: {
                    "precision": float(m.precision),
                    "recall": float(m.recall),
                    "support": m.support,
                    "tp": m.true_positive,
                    "fp": m.false_positive,
                    "fn": m.false_negative,
                }
                for name, m in self.per_tool.items()
            },
        }

    def table(self) -> str:
        rows = [("tool", "precision", "recall", "support")]
        for name, m in self.per_tool.items():
            rows.append((name, f"{float(m.precision):.4f}", f"{float(m.recall):.4f}", str(m.support)))
        rows.append(("weighted", f"{float(self.weighted_precision):.4f}", f"{float(self.weighted_recall):.4f}", str(self.counts.records)))
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))) for row in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        arga = "n/a (no positive cases)" if self.arg_accuracy is None else f"{float(self.arg_accuracy):.4f}"
        lines.append(f"ArgA: {arga}  ({self.counts.exact_matches}/{self.counts.positives} exact)")
        return "\n".join(lines)


def weighted_precision_recall(records: Sequence[EvalRecord]) -> MetricReport:
    if not records:
        raise EmptyDataset("no records to score")
    return MetricReport.from_counts(Counts.of(records))


def arg_accuracy(records: Sequence[EvalRecord]) -> Fraction:
    if not records:
        raise EmptyDataset("no records to score")
    counts = Counts.of(records)
    if counts.positives == 0:
        raise NoPositiveCases("no record has a gold tool call")
    return Fraction(counts.exact_matches, counts.positives)


def score_partitions(partitions: Sequence[Sequence[EvalRecord]], workers: int = 4) -> MetricReport:
    """Count each partition in parallel and merge; equals scoring the concatenation."""
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(Counts.of, partitions))
    total = Counts()
    for part in parts:
        total = total + part
    return MetricReport.from_counts(total)


def routing_accuracy(predicted: Sequence[Any], gold: Sequence[Any]) -> Fraction:
    if len(predicted) != len(gold):
        raise LengthMismatch(f"{len(predicted)} predictions for {len(gold)} gold labels")
    if not gold:
        raise EmptyDataset("no labels to score")
    hits = sum(1 for p, g in zip(predicted, gold) if p == g)
    return Fraction(hits, len(gold))


def fleiss_kappa(counts: Sequence[Sequence[int]] | np.ndarray) -> float:
    """Fleiss' kappa for an items x categories matrix of rater counts."""
    matrix = np.asarray(counts)
    if matrix.ndim != 2 or matrix.shape[0] == 0 or matrix.shape[1] == 0:
        raise ValueError("counts must be a non-empty 2-D matrix")
    if not np.issubdtype(matrix.dtype, np.integer):
        if not np.all(np.equal(np.mod(matrix, 1), 0)):
            raise ValueError("counts must be integers")
        matrix = matrix.astype(np.int64)
    if (matrix < 0).any():
        raise ValueError("counts must be nonnegative")
    row_sums = matrix.sum(axis=1)
    n = int(row_sums[0])
    if n < 2 or not (row_sums == n).all():
        raise ValueError("every item needs the same number of raters (at least 2)")
    items = matrix.shape[0]
    total = items * n
    squares = int((matrix.astype(object) ** 2).sum())
    p_bar = Fraction(squares - total, total * (n - 1))
    column = [int(c) for c in matrix.sum(axis=0)]
    p_e = Fraction(sum(c * c for c in column), total * total)
    if p_e == 1:
        raise DegenerateAgreement("all ratings fall in a single category; kappa is undefined")
    return float((p_bar - p_e) / (1 - p_e))


# ---------------------------------------------------------------------------
# datasets and reports


def load_records(path: str | Path) -> list[EvalRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    records.append(EvalRecord.from_dict(json.loads(line)))
                except (KeyError, ValueError, TypeError) as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return records


def evaluate(records: Sequence[EvalRecord], by: str | None = "dataset") -> dict[str, Any]:
    """Overall metrics plus one breakdown per value of ``by`` (dataset or language)."""
    report = {"overall": weighted_precision_recall(records).to_dict()}
    if by:
        groups: dict[str, list[EvalRecord]] = {}
        for record in records:
            groups.setdefault(getattr(record, by) or "-", []).append(record)
        report[f"by_{by}"] = {k: weighted_precision_recall(v).to_dict() for k, v in sorted(groups.items())}
    return report
