"""Build figures from sweep/replay CSV rows.

This package reads only the published CSV columns; it never recomputes
statistics beyond the 1.96-standard-error band. One line per policy, shaded
band where a standard error is available and positive, sentinel rows dropped
with a footnote. Rendering is pure: the same CSV yields the same image.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

Z_BAND = 1.96

FIGURE_KINDS = {
    "tau_sweep": {
        "x": "tau_star",
        "y": "mean_cr",
        "err": "stderr_cr",
        "xlabel": "true number of risk times",
        "ylabel": "mean competitive ratio",
    },
    "width_sweep": {
        "x": "width",
        "y": "mean_cr",
        "err": "stderr_cr",
        "xlabel": "prediction interval width",
        "ylabel": "mean competitive ratio",
    },
    "replay_cr": {
        "x": "width",
        "y": "mean_cr",
        "err": "stderr_cr",
        "xlabel": "prediction interval width",
        "ylabel": "mean competitive ratio across user-days",
    },
    "replay_entropy": {
        "x": "width",
        "y": "mean_penalty",
        "err": None,
        "xlabel": "prediction interval width",
        "ylabel": "mean entropy change across user-days",
    },
}


@dataclass(frozen=True)
class FigureSpec:
    input_csv: Path
    kind: str
    output_image: Path

    def __post_init__(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; known: {sorted(FIGURE_KINDS)}"
            )


def read_rows(path: str | Path, kind: str) -> list[dict]:
    """Load CSV rows, checking the columns the figure kind needs."""
    layout = FIGURE_KINDS[kind]
    needed = {"policy", "sentinel", layout["x"], layout["y"]}
    if layout["err"]:
        needed.add(layout["err"])
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty CSV")
        missing = sorted(needed - set(reader.fieldnames))
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        return list(reader)


def _to_float(text: str) -> float:
    return float(text) if text.strip() != "" else math.nan


def build_figure(rows: list[dict], kind: str):
    """Figure with one series per policy; returns (figure, omitted_count)."""
    layout = FIGURE_KINDS[kind]
    series: dict[str, list[tuple[float, float, float]]] = {}
    omitted = 0
    for row in rows:
        y = _to_float(row[layout["y"]])
        if row.get("sentinel", "0").strip() == "1" or not math.isfinite(y):
            omitted += 1
            continue
        x = _to_float(row[layout["x"]])
        err = _to_float(row[layout["err"]]) if layout["err"] else math.nan
        series.setdefault(row["policy"], []).append((x, y, err))
    if not series:
        raise ValueError("no plottable rows (all sentinel or empty)")

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for policy in sorted(series):
        pts = sorted(series[policy])
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.plot(xs, ys, marker="o", markersize=3, label=policy)
        errs = [p[2] for p in pts]
        if any(math.isfinite(e) and e > 0 for e in errs):
            lo = [y - Z_BAND * e if math.isfinite(e) else y for y, e in zip(ys, errs)]
            hi = [y + Z_BAND * e if math.isfinite(e) else y for y, e in zip(ys, errs)]
            ax.fill_between(xs, lo, hi, alpha=0.2)
    ax.set_xlabel(layout["xlabel"])
    ax.set_ylabel(layout["ylabel"])
    ax.legend()
    ax.grid(True, alpha=0.3)
    if omitted:
        fig.text(
            0.99,
            0.01,
            f"{omitted} sentinel row(s) omitted",
            ha="right",
            va="bottom",
            fontsize=7,
        )
    fig.tight_layout()
    return fig, omitted


def render(spec: FigureSpec) -> int:
    """Read, build, save. Returns the number of omitted sentinel rows."""
    rows = read_rows(spec.input_csv, spec.kind)
    fig, omitted = build_figure(rows, spec.kind)
    try:
        fig.savefig(spec.output_image, dpi=150)
    finally:
        plt.close(fig)
    return omitted
