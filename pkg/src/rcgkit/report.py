"""Evaluation report rendering: aligned text for the terminal, tab-delimited
rows for machines, and bar-chart figures written next to them."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analysis import EvalReport

SUMMARY_TSV = "summary.tsv"
ROWS_TSV = "rows.tsv"
ROUGE_FIGURE = "rouge_l.png"
TIME_FIGURE = "time_per_query.png"


def render_summary(reports: list[EvalReport]) -> str:
    """Aligned approach / Rouge-L / time-per-query table."""
    header = ("Approach", "Rouge-L", "time/query(s)")
    rows = [
        (r.approach, f"{r.mean_rouge_l:.3f}", f"{r.mean_time_per_query_s:.2f}") for r in reports
    ]
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h) for i, h in enumerate(header)]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)


def _tsv_escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def write_summary_tsv(reports: list[EvalReport], path: Path) -> None:
    lines = ["approach\tmean_rouge_l\tmean_time_per_query_s"]
    for r in reports:
        lines.append(f"{r.approach}\t{r.mean_rouge_l:.6f}\t{r.mean_time_per_query_s:.4f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_rows_tsv(reports: list[EvalReport], path: Path) -> None:
    lines = ["approach\tquery\tresponse\trouge_l_f1\ttime_s\terror"]
    for r in reports:
        for row in r.rows:
            lines.append(
                "\t".join(
                    (
                        r.approach,
                        _tsv_escape(row.query),
                        _tsv_escape(row.response),
                        f"{row.rouge_l:.6f}",
                        f"{row.time_s:.4f}",
                        _tsv_escape(row.error or ""),
                    )
                )
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _bar_figure(reports: list[EvalReport], values: list[float], ylabel: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(reports) + 1.5), 3.2))
    labels = [r.approach for r in reports]
    ax.bar(range(len(reports)), values, color="#4878a8")
    ax.set_xticks(range(len(reports)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel(ylabel)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report_files(reports: list[EvalReport], out_dir: str | Path) -> dict[str, str]:
    """Write delimited rows plus figures; returns name -> path written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "summary_tsv": out_dir / SUMMARY_TSV,
        "rows_tsv": out_dir / ROWS_TSV,
        "rouge_figure": out_dir / ROUGE_FIGURE,
        "time_figure": out_dir / TIME_FIGURE,
    }
    write_summary_tsv(reports, paths["summary_tsv"])
    write_rows_tsv(reports, paths["rows_tsv"])
    _bar_figure(reports, [r.mean_rouge_l for r in reports], "mean Rouge-L (F1)", paths["rouge_figure"])
    _bar_figure(
        reports,
        [r.mean_time_per_query_s for r in reports],
        "mean time per query (s)",
        paths["time_figure"],
    )
    return {name: str(p) for name, p in paths.items()}
