"""Report emission: metrics.json, tables.csv, per-subgroup CSVs, and
rendered figures.

All output is deterministic: fixed field order, repr floats in JSON, and
PNGs stripped of varying metadata, so re-emitting identical results gives
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cccdetect.evaluation import MetricsReport, SubgroupReport

PNG_METADATA = {"Software": None}  # drop the version-carrying tag


def _fmt_pct(x: float) -> str:
    return f"{100.0 * x:.1f}"


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue())
    return path


def emit_report(rows, out_dir, subgroups=(), epoch_accuracy=None, figures=True):
    """Write the ablation-style report for a list of configuration rows.

    ``rows`` are dicts with keys model, pretrain, freeze and a
    MetricsReport under "metrics".  Returns the list of written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    payload = {
        "rows": [
            {
                "model": r["model"],
                "pretrain": bool(r["pretrain"]),
                "freeze": bool(r["freeze"]),
                **r["metrics"].as_dict(),
            }
            for r in rows
        ],
        "subgroups": [sg.as_dict() for sg in subgroups],
    }
    if epoch_accuracy is not None:
        payload["epoch_accuracy"] = [float(a) for a in epoch_accuracy]
    metrics_path = out / "metrics.json"
    metrics_path.write_text(json.dumps(payload, indent=2) + "\n")
    written.append(metrics_path)

    table_rows = []
    for r in rows:
        m = r["metrics"]
        table_rows.append([
            r["model"],
            "yes" if r["pretrain"] else "no",
            "yes" if r["freeze"] else "no",
            _fmt_pct(m.accuracy),
            _fmt_pct(m.sensitivity),
            _fmt_pct(m.specificity),
        ])
    written.append(_write_csv(out / "tables.csv",
                              ["Model", "Pretrain", "Freeze", "Acc [%]", "Sens [%]", "Spec [%]"],
                              table_rows))

    for sg in subgroups:
        csv_rows = [[label, n, _fmt_pct(s)] for label, n, s in sg.groups]
        for ica_id, reason in sg.exclusions:
            csv_rows.append([f"excluded: {ica_id}", "", reason])
        written.append(_write_csv(out / f"subgroup_{sg.grouping}.csv",
                                  ["Group", "N", "Sensitivity [%]"], csv_rows))

    if figures:
        fig_dir = out / "figures"
        fig_dir.mkdir(exist_ok=True)
        if rows:
            best = max(rows, key=lambda r: r["metrics"].accuracy)
            written.append(_confusion_figure(best, fig_dir / "confusion_matrix.png"))
            written.append(_ablation_figure(rows, fig_dir / "ablation_accuracy.png"))
        for sg in subgroups:
            written.append(_subgroup_figure(sg, fig_dir / f"subgroup_{sg.grouping}.png"))
        if epoch_accuracy is not None:
            written.append(_epoch_figure(epoch_accuracy, fig_dir / "epoch_accuracy.png"))
    return written


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=110, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def _confusion_figure(row, path: Path) -> Path:
    cm = row["metrics"].counts
    grid = np.array([[cm.tp, cm.fn], [cm.fp, cm.tn]])
    fig, ax = plt.subplots(figsize=(3.4, 3.0))
    ax.imshow(grid, cmap="Blues")
    for (i, j), v in np.ndenumerate(grid):
        ax.text(j, i, str(v), ha="center", va="center",
                color="white" if v > grid.max() / 2 else "black")
    ax.set_xticks([0, 1], ["pred CCC", "pred no CCC"])
    ax.set_yticks([0, 1], ["CCC", "no CCC"])
    ax.set_title(f"{row['model']} (pretrain={'y' if row['pretrain'] else 'n'}, "
                 f"freeze={'y' if row['freeze'] else 'n'})", fontsize=9)
    fig.tight_layout()
    return _save(fig, path)


def _ablation_figure(rows, path: Path) -> Path:
    labels = [f"{r['model']}\npre={'y' if r['pretrain'] else 'n'} frz={'y' if r['freeze'] else 'n'}"
              for r in rows]
    accs = [100.0 * r["metrics"].accuracy for r in rows]
    fig, ax = plt.subplots(figsize=(1.2 + 0.9 * len(rows), 3.2))
    ax.bar(range(len(rows)), accs, color="#4878d0")
    ax.set_xticks(range(len(rows)), labels, fontsize=7)
    ax.set_ylabel("Accuracy [%]")
    ax.set_ylim(0, 100)
    fig.tight_layout()
    return _save(fig, path)


def _subgroup_figure(sg: SubgroupReport, path: Path) -> Path:
    labels = [g for g, _, _ in sg.groups]
    sens = [100.0 * s for _, _, s in sg.groups]
    ns = [n for _, n, _ in sg.groups]
    fig, ax = plt.subplots(figsize=(1.4 + 0.8 * len(labels), 3.0))
    ax.bar(range(len(labels)), sens, color="#6acc64")
    for i, (s, n) in enumerate(zip(sens, ns)):
        ax.text(i, s + 1, f"n={n}", ha="center", fontsize=8)
    ax.set_xticks(range(len(labels)), labels, fontsize=8)
    ax.set_ylabel("Sensitivity [%]")
    ax.set_ylim(0, 108)
    ax.set_title(f"Subgroups by {sg.grouping}", fontsize=9)
    fig.tight_layout()
    return _save(fig, path)


def _epoch_figure(epoch_accuracy, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(4.2, 3.0))
    xs = np.arange(1, len(epoch_accuracy) + 1)
    ax.plot(xs, [100.0 * a for a in epoch_accuracy], marker="o", ms=3)
    ax.set_xlabel("Epoch")
    ax.set_ylabel("Pooled accuracy [%]")
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    return _save(fig, path)
