# -*- encoding: utf-8 -*-

import csv
import io
import logging

import numpy as np
import pytest
from pytest import approx

from gflbs.datasets import ground_truth
from gflbs.metrics import (
    COLUMNS,
    confusion,
    confusion_counts,
    evaluate_sequence,
    f_score,
    misclassified,
    write_report,
)


def test_confusion():
    mask = np.array([[True, True], [False, False]])
    gt = np.array([[True, False], [True, False]])
    c = confusion(mask, gt)
    assert c == confusion_counts(1, 1, 1, 1)
    assert c.total == 4
    assert f_score(c) == approx(0.5)
    assert misclassified(c) == 2


def test_confusion_ignore():
    mask = np.array([True, True, False])
    gt = np.array([True, False, False])
    c = confusion(mask, gt, ignore=[False, True, False])
    assert c == confusion_counts(1, 0, 0, 1)
    assert f_score(c) == 1.0


def test_confusion_errors():
    with pytest.raises(ValueError):
        confusion(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        confusion(np.zeros(3), np.zeros(3), np.zeros(2))


def test_f_score_conventions():
    assert f_score(confusion_counts(0, 0, 0, 10)) == 1.0
    assert f_score(confusion_counts(0, 3, 0, 7)) == 0.0
    assert f_score(confusion_counts(0, 0, 4, 6)) == 0.0
    assert f_score(confusion_counts(4, 0, 0, 6)) == 1.0


def test_counts_add():
    total = confusion_counts(1, 2, 3, 4) + confusion_counts(10, 20, 30, 40)
    assert total == confusion_counts(11, 22, 33, 44)


def test_evaluate_sequence(caplog):
    truth = ground_truth(
        {"a": [[True, False]], "b": [[False, False]], "c": [[True, True]]}
    )
    masks = {"a": np.array([[True, True]]), "b": np.array([[False, False]])}
    masks["extra"] = np.array([[True, True]])
    with caplog.at_level(logging.WARNING, logger="gflbs.metrics"):
        report = evaluate_sequence(masks, truth, "seq", runtime=1.5, iterations=12)
    assert [f.name for f in report.frames] == ["a", "b"]
    assert report.unmatched == ["c"]
    assert "c" in caplog.text
    assert report.counts == confusion_counts(1, 1, 0, 2)
    assert report.f_score == approx(2 / 3)
    assert report.misclassified == 1
    assert report.frames[1].f_score == 1.0


def test_write_report():
    truth = ground_truth({"a": [[True, False]], "b": [[False, True]]})
    masks = {"a": np.array([[True, False]]), "b": np.array([[False, False]])}
    report = evaluate_sequence(masks, truth, "seq", iterations=7)
    out = io.StringIO()
    write_report([report], out)
    rows = list(csv.reader(io.StringIO(out.getvalue())))
    assert tuple(rows[0]) == COLUMNS
    assert rows[1][:3] == ["seq", "a", "1"]
    assert float(rows[1][7]) == approx(1.0)
    assert rows[1][-3:] == ["", "", ""]
    assert rows[3][:7] == ["seq", "*", "2", "1", "0", "1", "2"]
    assert float(rows[3][7]) == approx(2 / 3, abs=1e-6)
    assert rows[3][8:] == ["1", "0", "", "7"]


def test_write_report_file(tmp_path, capsys):
    truth = ground_truth({"a": [[True]]})
    report = evaluate_sequence({"a": np.array([[True]])}, truth, "s")
    write_report([report], tmp_path / "report.csv")
    assert len((tmp_path / "report.csv").read_text().splitlines()) == 3
    write_report([report])
    assert capsys.readouterr().out.splitlines()[0].startswith("sequence,frame")
