from __future__ import annotations

import json
from fractions import Fraction

import pytest

import oracles
from groundqa.agent import NoToolCall, ToolCall
from groundqa.errors import DegenerateAgreement, EmptyDataset, LengthMismatch, NoPositiveCases
from groundqa.evaluation import (
    EvalRecord,
    arg_accuracy,
    calls_match,
    canonical_value,
    evaluate,
    fleiss_kappa,
    load_records,
    routing_accuracy,
    score_partitions,
    weighted_precision_recall,
)


def rec(i, gold, pred, **kw):
    return EvalRecord(str(i), gold, pred, **kw)


def call(name, **args):
    return ToolCall(name, args)


def test_small_hand_worked_report():
    records = [
        rec(0, call("a", x=1), call("a", x=1)),
        rec(1, call("a", x=1), call("b", x=1)),
        rec(2, call("b"), call("b")),
        rec(3, NoToolCall(), call("a", x=2)),
    ]
    report = weighted_precision_recall(records)
    # a: tp 1, predicted 2, support 2 -> P 1/2 R 1/2; b: tp 1, pred 2, support 1 -> P 1/2 R 1; none: support 1, never predicted
    assert report.per_tool["a"].precision == Fraction(1, 2)
    assert report.per_tool["b"].recall == 1
    assert report.per_tool["<no_tool_call>"].precision == 0
    assert report.weighted_precision == Fraction(2, 4) * Fraction(1, 2) + Fraction(1, 4) * Fraction(1, 2)
    assert report.weighted_recall == Fraction(2, 4) * Fraction(1, 2) + Fraction(1, 4) * 1
    assert report.arg_accuracy == Fraction(2, 3)
    assert "ArgA" in report.table()
    assert report.to_dict()["per_tool"]["a"]["fp"] == 1


def test_never_predicted_class_has_zero_precision_but_counts_in_weights():
    records = [rec(0, call("a"), call("b")), rec(1, call("b"), call("b"))]
    report = weighted_precision_recall(records)
    assert report.per_tool["a"].precision == 0 and report.per_tool["a"].support == 1
    gold = ["a", "b"]
    pred = ["b", "b"]
    wp, wr, _ = oracles.weighted_pr_oracle(gold, pred)
    assert (report.weighted_precision, report.weighted_recall) == (wp, wr)


def test_canonical_values():
    assert canonical_value("2024/01/15") == "2024-01-15"
    assert canonical_value("January 15, 2024") == "2024-01-15"
    assert canonical_value("15th of Jan 2024") == "2024-01-15"
    assert canonical_value("15/01/2024") == "15/01/2024"  # day-first numeric is ambiguous, left alone
    assert canonical_value("2024-02-30") == "2024-02-30"  # not a real date
    assert canonical_value(5) == canonical_value(5.0) == canonical_value("5") == canonical_value(" 5.00 ") == "5"
    assert canonical_value(True) is True and canonical_value(None) is None
    assert canonical_value({"b": [" X "], "a": 1}) == {"a": "1", "b": ["x"]}


def test_calls_match():
    assert calls_match(call("Prayer_Times", city="Doha"), call("prayer_times", city=" doha "))
    assert not calls_match(call("prayer_times", city="Doha"), call("prayer_times", city="Dubai"))
    assert not calls_match(call("t", a=1), call("t", a=1, b=2))
    assert calls_match(NoToolCall(), NoToolCall())
    assert not calls_match(NoToolCall(), call("t"))
    assert not calls_match(call("t", flag=True), call("t", flag="true"))


def test_arg_accuracy_errors():
    with pytest.raises(EmptyDataset):
        arg_accuracy([])
    with pytest.raises(NoPositiveCases):
        arg_accuracy([rec(0, NoToolCall(), NoToolCall())])
    with pytest.raises(EmptyDataset):
        weighted_precision_recall([])


def test_partitions_merge_to_the_whole():
    records = [rec(i, call(f"t{i % 3}", v=i % 2), call(f"t{i % 2}", v=i % 2)) for i in range(60)]
    whole = weighted_precision_recall(records)
    merged = score_partitions([records[:7], records[7:30], records[30:]], workers=3)
    assert merged.weighted_precision == whole.weighted_precision
    assert merged.weighted_recall == whole.weighted_recall
    assert merged.arg_accuracy == whole.arg_accuracy


def test_routing_accuracy():
    assert routing_accuracy(["a", "b", "c"], ["a", "x", "c"]) == Fraction(2, 3)
    with pytest.raises(LengthMismatch):
        routing_accuracy(["a"], [])
    with pytest.raises(EmptyDataset):
        routing_accuracy([], [])


def test_fleiss_input_validation():
    with pytest.raises(DegenerateAgreement):
        fleiss_kappa([[3, 0], [3, 0]])
    with pytest.raises(ValueError):
        fleiss_kappa([[3, 0], [2, 0]])  # unequal rater counts
    with pytest.raises(ValueError):
        fleiss_kappa([[1, 0]])  # one rater
    with pytest.raises(ValueError):
        fleiss_kappa([[1.5, 0.5]])
    with pytest.raises(ValueError):
        fleiss_kappa([])


def test_load_and_evaluate_by_group(tmp_path):
    path = tmp_path / "records.jsonl"
    rows = [
        {"id": "1", "gold": {"name": "a", "arguments": {"x": 1}}, "predicted": {"name": "a", "arguments": {"x": "1"}}, "language": "en", "dataset": "d1"},
        {"id": "2", "gold": None, "predicted": "<no_tool_call>", "language": "ar", "dataset": "d2"},
        {"id": "3", "gold": {"name": "b"}, "predicted": None, "language": "ar", "dataset": "d2"},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n\n", encoding="utf-8")
    records = load_records(path)
    assert [r.function_call for r in records] == [True, False, True]
    assert records[0].to_dict()["fc"] is True
    report = evaluate(records, by="language")
    assert set(report["by_language"]) == {"ar", "en"}
    assert report["overall"]["arg_accuracy"] == 0.5
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"gold": null}\n', encoding="utf-8")
    with pytest.raises(ValueError, match="bad.jsonl:1"):
        load_records(bad)
