"""Evaluation report rendering: JSON, per-query CSV, plot-data CSV, and
matplotlib figures written alongside the delimited output."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # file rendering only; no display in scope
import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import EvalReport

log = logging.getLogger(__name__)

REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
PLOT_DATA_CSV = "plot_data.csv"
SCORE_HIST_PNG = "score_histogram.png"
MEAN_SCORES_PNG = "mean_scores.png"


def write_report(report: EvalReport, out_dir) -> list[str]:
    """Write every report artifact into ``out_dir``; returns the file names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / REPORT_JSON, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)

    with open(out / REPORT_CSV, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trip_id", "start_poi", "end_poi", "n",
                         "truth", "recommendation", "f1", "pairs_f1",
                         "skipped_reason"])
        for r in report.records:
            writer.writerow([
                r.trip_id,
                r.query["start_poi"] if r.query else "",
                r.query["end_poi"] if r.query else "",
                r.query["n"] if r.query else "",
                " ".join(r.truth),
                " ".join(r.recommendation) if r.recommendation else "",
                repr(r.f1) if r.f1 is not None else "",
                repr(r.pairs_f1) if r.pairs_f1 is not None else "",
                r.skipped_reason or "",
            ])

    with open(out / PLOT_DATA_CSV, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "mean"])
        writer.writerow(["f1", repr(report.mean_f1)])
        writer.writerow(["pairs_f1", repr(report.mean_pairs_f1)])

    _render_figures(report, out)
    names = [REPORT_JSON, REPORT_CSV, PLOT_DATA_CSV, SCORE_HIST_PNG, MEAN_SCORES_PNG]
    log.info("report written to %s (%s)", out, ", ".join(names))
    return names


def _render_figures(report: EvalReport, out: Path) -> None:
    scored = [r for r in report.records if r.skipped_reason is None]
    f1s = [r.f1 for r in scored]
    pf1s = [r.pairs_f1 for r in scored]

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, values, label in ((axes[0], f1s, "F1"), (axes[1], pf1s, "pairs-F1")):
        ax.hist(values if values else [0.0], bins=20, range=(0.0, 1.0),
                color="#4878cf", edgecolor="white")
        ax.set_xlabel(label)
        ax.set_ylabel("queries")
        ax.set_xlim(0.0, 1.0)
    fig.suptitle(f"Per-query scores over {len(scored)} evaluated splits")
    fig.tight_layout()
    fig.savefig(out / SCORE_HIST_PNG, dpi=110)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.bar(["F1", "pairs-F1"], [report.mean_f1, report.mean_pairs_f1],
           color=["#4878cf", "#ee854a"])
    ax.set_ylim(0.0, 1.0)
    ax.set_ylabel("mean score")
    for i, v in enumerate([report.mean_f1, report.mean_pairs_f1]):
        ax.text(i, v + 0.02, f"{v:.3f}", ha="center")
    fig.tight_layout()
    fig.savefig(out / MEAN_SCORES_PNG, dpi=110)
    plt.close(fig)
