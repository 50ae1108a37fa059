import itertools

import pytest
from hypothesis import given, strategies as st

from incongruity.evaluation import (REPORT_COLUMNS, Metrics, auc, compute_metrics, confusion_counts, format_support,
                                    parse_support, precision_recall_f1, read_report, report)


def pairwise_auc(probs, labels):
    pos = [p for p, l in zip(probs, labels) if l == 1]
    neg = [p for p, l in zip(probs, labels) if l == 0]
    wins = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a, b in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def test_confusion_example():
    assert confusion_counts([0.9, 0.1], [1, 0]) == (1, 0, 1, 0)


def test_threshold_is_positive():
    assert confusion_counts([0.5], [0]) == (0, 1, 0, 0)


def test_confusion_empty():
    with pytest.raises(ValueError):
        confusion_counts([], [])


def test_auc_examples():
    assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert auc([0.4] * 6, [1, 0, 1, 0, 0, 1]) == 0.5
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])


@given(st.lists(st.tuples(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]), st.integers(0, 1)), min_size=2, max_size=60))
def test_auc_matches_pairwise_with_ties(pairs):
    probs, labels = zip(*pairs)
    if len(set(labels)) < 2:
        return
    assert auc(probs, labels) == pytest.approx(pairwise_auc(probs, labels), abs=1e-12)


def test_prf_zero_division():
    assert precision_recall_f1(0, 0, 0) == (0.0, 0.0, 0.0)
    assert precision_recall_f1(2, 2, 0) == (0.5, 1.0, pytest.approx(2 / 3))


def test_perfect_outputs():
    m = compute_metrics([0.9, 0.1, 0.8], [1, 0, 1], [0.9, 0.2, 0.7], [1, 0, 1])
    assert (m.acc_doc, m.acc_para, m.auc, m.precision, m.recall, m.f1) == (1.0,) * 6
    assert m.support == (1, 2)


def test_constant_half_on_balanced_labels():
    m = compute_metrics([0.5] * 4, [1, 0, 1, 0], [0.5] * 4, [1, 1, 0, 0])
    assert (m.acc_doc, m.recall, m.precision) == (0.5, 1.0, 0.5)
    assert m.acc_para == 0.5


def metrics(**kw):
    base = dict(acc_para=1.0, acc_doc=1.0, auc=1.0, precision=1.0, recall=1.0, f1=1.0, support=(3000, 3000))
    return Metrics(**{**base, **kw})


def test_report_single_row():
    text = report([("test", metrics())])
    header, rule, row = text.splitlines()
    assert header.split() == list(REPORT_COLUMNS)
    assert row.split() == ["test", "6000", "1.0000", "1.0000", "1.0000", "1.0000", "1.0000", "[3000", "3000]"]


def test_report_two_rows_in_order():
    lines = report([("b", metrics()), ("a", metrics(acc_doc=0.5))]).splitlines()
    assert [l.split()[0] for l in lines[2:]] == ["b", "a"]


def test_report_round_trip(tmp_path):
    rows = [("dev", metrics(acc_para=0.91234, support=(10, 12))), ("test", metrics(f1=0.5))]
    report(rows, tmp_path / "r.csv")
    back = read_report(tmp_path / "r.csv")
    assert [n for n, _ in back] == ["dev", "test"]
    assert back[0][1].acc_para == 0.9123 and back[0][1].support == (10, 12)
    assert (tmp_path / "r.json").exists()


def test_support_format():
    assert format_support((3000, 3000)) == "[3000 3000]"
    assert parse_support("[3 4]") == (3, 4)
