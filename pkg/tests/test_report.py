import json

import pytest

from cccdetect.evaluation import ConfusionMatrix, metrics, subgroup_sensitivity
from cccdetect.report import emit_report

from test_evaluation import TestSubgroups


def six_rows():
    # shaped like the six-configuration ablation grid
    counts = [
        (105, 63, 114, 54), (134, 34, 131, 37), (126, 42, 130, 38),
        (104, 64, 102, 66), (130, 38, 131, 37), (135, 33, 132, 36),
    ]
    rows = []
    for (model, pre, frz), (tp, fn, tn, fp) in zip(
            [("vanilla", False, False), ("vanilla", True, False), ("vanilla", True, True),
             ("fsl", False, False), ("fsl", True, False), ("fsl", True, True)], counts):
        rows.append({
            "model": model, "pretrain": pre, "freeze": frz,
            "metrics": metrics(ConfusionMatrix(tp=tp, fn=fn, tn=tn, fp=fp)),
        })
    return rows


def test_six_rows_table_layout(tmp_path):
    written = emit_report(six_rows(), tmp_path)
    table = (tmp_path / "tables.csv").read_text().splitlines()
    assert table[0] == "Model,Pretrain,Freeze,Acc [%],Sens [%],Spec [%]"
    assert len(table) == 7
    assert table[-1].startswith("fsl,yes,yes,79.5,80.4,78.6")


def test_metrics_json_round_trip(tmp_path):
    rows = six_rows()
    emit_report(rows, tmp_path, figures=False)
    payload = json.loads((tmp_path / "metrics.json").read_text())
    assert len(payload["rows"]) == 6
    best = payload["rows"][-1]
    m = rows[-1]["metrics"]
    assert best["accuracy"] == m.accuracy
    assert best["tp"] == m.counts.tp


def test_re_emission_byte_identical(tmp_path):
    rows = six_rows()
    sub = subgroup_sensitivity(TestSubgroups()._preds(), "rentrop")
    d1 = tmp_path / "r1"
    d2 = tmp_path / "r2"
    w1 = emit_report(rows, d1, subgroups=[sub], epoch_accuracy=[0.6, 0.7, 0.8])
    w2 = emit_report(rows, d2, subgroups=[sub], epoch_accuracy=[0.6, 0.7, 0.8])
    assert [p.relative_to(d1) for p in w1] == [p.relative_to(d2) for p in w2]
    for a, b in zip(w1, w2):
        assert a.read_bytes() == b.read_bytes(), a.name


def test_subgroup_csv_contains_exclusions(tmp_path):
    rows = six_rows()
    preds = TestSubgroups()._preds()
    preds.append(("LOST-I0", 0.4, None))
    sub = subgroup_sensitivity(preds, "rentrop")
    emit_report(rows, tmp_path, subgroups=[sub], figures=False)
    text = (tmp_path / "subgroup_rentrop.csv").read_text()
    assert "excluded: LOST-I0" in text


def test_figures_rendered(tmp_path):
    written = emit_report(six_rows(), tmp_path, epoch_accuracy=[0.5, 0.9])
    names = {p.name for p in written}
    assert {"confusion_matrix.png", "ablation_accuracy.png", "epoch_accuracy.png"} <= names
    for p in written:
        if p.suffix == ".png":
            assert p.stat().st_size > 500
