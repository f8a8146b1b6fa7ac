"""Report rendering for the CLI: delimited score tables plus matplotlib figures."""

from __future__ import annotations

from pathlib import Path

from .evaluation import EvalReport


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def write_eval_report(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Write scores.tsv plus per-query and summary figures; returns created paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    tsv = out / "scores.tsv"
    with open(tsv, "w", encoding="utf-8") as handle:
        handle.write("query_id\tfinal_score\n")
        for query_id, score in report.per_query:
            handle.write(f"{query_id}\t{score:.6f}\n")
        handle.write(f"MEAN\t{report.mean_score:.6f}\n")
    written.append(tsv)

    plt = _plt()

    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * len(report.per_query)), 3.2))
    labels = [q for q, _ in report.per_query]
    values = [s for _, s in report.per_query]
    ax.bar(range(len(values)), values, color="#4878a8")
    ax.axhline(report.mean_score, color="#c44e52", linestyle="--", linewidth=1, label=f"mean {report.mean_score:.3f}")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("final score")
    ax.legend(loc="upper right", fontsize=7)
    fig.tight_layout()
    per_query_png = out / "per_query_scores.png"
    fig.savefig(per_query_png, dpi=120)
    plt.close(fig)
    written.append(per_query_png)

    fig, ax = plt.subplots(figsize=(4.5, 3.0))
    ax.hist(values, bins=min(10, max(3, len(values))), range=(0.0, 1.0), color="#6aa84f", edgecolor="white")
    ax.set_xlabel("final score")
    ax.set_ylabel("queries")
    fig.tight_layout()
    hist_png = out / "score_distribution.png"
    fig.savefig(hist_png, dpi=120)
    plt.close(fig)
    written.append(hist_png)
    return written


def write_search_report(rows: list[tuple[str, float]], out_dir: str | Path, title: str = "search") -> list[Path]:
    """Write hits.tsv plus a ranked-score figure for one search run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    tsv = out / "hits.tsv"
    with open(tsv, "w", encoding="utf-8") as handle:
        handle.write("key\tscore\n")
        for key, score in rows:
            handle.write(f"{key}\t{score:.6f}\n")
    written.append(tsv)

    plt = _plt()
    fig, ax = plt.subplots(figsize=(4.5, 3.0))
    ax.plot(range(1, len(rows) + 1), [s for _, s in rows], marker="o", markersize=3, color="#4878a8")
    ax.set_xlabel("rank")
    ax.set_ylabel("score")
    ax.set_title(title, fontsize=9)
    fig.tight_layout()
    png = out / "rank_scores.png"
    fig.savefig(png, dpi=120)
    plt.close(fig)
    written.append(png)
    return written
