"""Markdown report assembly with matplotlib figures.

Values from the source CSVs are passed through as strings, never re-parsed
and re-rounded, so the report is byte-faithful to its inputs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


class ReportError(ValueError):
    pass


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.exists():
        raise ReportError(f"input CSV not found: {path}")
    with path.open("r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 2:
        raise ReportError(f"malformed input CSV: {path}")
    header, body = rows[0], rows[1:]
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ReportError(f"malformed input CSV {path}: row {i} has {len(row)} cells")
    return header, body


def _markdown_table(header: list[str], body: list[list[str]]) -> str:
    lines = [
        "| " + " | ".join(header) + " |",
        "| " + " | ".join("---" for _ in header) + " |",
    ]
    lines += ["| " + " | ".join(row) + " |" for row in body]
    return "\n".join(lines)


def _step_figure(path: Path, header: list[str], body: list[list[str]], out_png: Path) -> None:
    steps = [int(row[0]) for row in body]
    values = [float(row[1]) for row in body]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(steps, values, marker="o", color="#2b6cb0")
    ax.set_xlabel("refinement step")
    ax.set_ylabel(header[1])
    ax.set_title(path.stem)
    ax.set_xticks(steps)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def write_report(
    eval_csvs: list[str | Path],
    step_csvs: list[str | Path],
    out_path: str | Path,
) -> Path:
    """Assemble metric and per-step tables (plus step figures) into markdown."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    sections: list[str] = ["# Ranking report", ""]

    if eval_csvs:
        sections += ["## Evaluation metrics", ""]
        for raw in eval_csvs:
            path = Path(raw)
            header, body = _read_csv(path)
            sections += [f"### {path.stem}", "", _markdown_table(header, body), ""]

    if step_csvs:
        sections += ["## Per-step ranking quality", ""]
        for raw in step_csvs:
            path = Path(raw)
            header, body = _read_csv(path)
            png = out_path.parent / f"{path.stem}.png"
            _step_figure(path, header, body, png)
            sections += [
                f"### {path.stem}",
                "",
                _markdown_table(header, body),
                "",
                f"![{path.stem}]({png.name})",
                "",
            ]

    out_path.write_text("\n".join(sections), encoding="utf-8")
    return out_path
