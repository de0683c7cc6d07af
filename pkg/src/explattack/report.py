"""Render campaign summaries into comparison tables and figures.

The markdown table mirrors the usual robustness synopsis: one column per
victim variant, rows for original accuracy, after-attack accuracy, attack
success rate, and average queries over attempted attacks, with the
direction arrows in the row labels.  Percentages are scaled to 0-100 and
shown with 2 decimals; the CSV next to it carries the raw fractions at
full precision.  With a designated baseline column, a second table gives
each variant's percentage drop in attack success rate.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .errors import ReportError
from .evaluate import RunSummary, implied_after_attack, pct_decrease

# Stored-vs-implied after-attack gaps beyond this are surfaced as a note;
# anything smaller is rounding noise at the 2-decimal percent scale.
GAP_NOTE_TOL = 5e-5

ROWS = (
    ("Original accuracy (↑)", "original_accuracy"),
    ("After-attack accuracy (↑)", "after_attack_accuracy"),
    ("Attack success rate (↓)", "attack_success_rate"),
    ("Avg num queries (↑)", "avg_queries_attempted"),
)
PERCENT_FIELDS = {"original_accuracy", "after_attack_accuracy", "attack_success_rate"}


def _check(summaries: Sequence[RunSummary], labels: Sequence[str]) -> None:
    if not summaries:
        raise ReportError("need at least one summary")
    if len(summaries) != len(labels):
        raise ReportError(
            f"{len(summaries)} summaries but {len(labels)} labels"
        )
    dupes = sorted({l for l in labels if labels.count(l) > 1})
    if dupes:
        raise ReportError(f"duplicate labels: {', '.join(dupes)}")


def render_report(
    summaries: Sequence[RunSummary],
    labels: Sequence[str],
    baseline: str | None = None,
) -> tuple[str, str]:
    """Return (markdown, csv) for the given summaries.

    baseline names the column the decrease table is computed against; the
    table is omitted when no baseline is given or there is nothing to
    compare it to.
    """
    _check(summaries, labels)
    if baseline is not None and baseline not in labels:
        raise ReportError(f"baseline label {baseline!r} not among {list(labels)}")

    md: list[str] = []
    csv: list[str] = ["row_metric,variant_label,value"]

    md.append("# Attack results")
    md.append("")
    md.append("| Metric | " + " | ".join(labels) + " |")
    md.append("| --- |" + " --- |" * len(labels))
    for row_label, fld in ROWS:
        cells = []
        for summary in summaries:
            value = getattr(summary, fld)
            shown = value * 100.0 if fld in PERCENT_FIELDS else value
            cells.append(f"{shown:.2f}")
        md.append(f"| {row_label} | " + " | ".join(cells) + " |")
    for summary, label in zip(summaries, labels):
        for _, fld in ROWS:
            csv.append(f"{fld},{label},{getattr(summary, fld)!r}")

    notes = []
    for summary, label in zip(summaries, labels):
        gap = summary.identity_gap()
        if abs(gap) > GAP_NOTE_TOL:
            implied = implied_after_attack(
                summary.original_accuracy, summary.attack_success_rate
            )
            notes.append(
                f"note: {label}: stored after-attack accuracy "
                f"{summary.after_attack_accuracy * 100:.2f}% differs from the "
                f"identity-implied {implied * 100:.2f}% by {abs(gap) * 100:.2f} pp"
            )
    if notes:
        md.append("")
        md.extend(notes)

    if baseline is not None and len(summaries) > 1:
        base = summaries[labels.index(baseline)]
        if base.attack_success_rate <= 0:
            raise ReportError(
                f"baseline {baseline!r} has attack success rate 0; "
                "decrease is undefined"
            )
        variants = [
            (s, l) for s, l in zip(summaries, labels) if l != baseline
        ]
        md.append("")
        md.append(f"# Attack success rate decrease vs {baseline} (%)")
        md.append("")
        md.append("| Metric | " + " | ".join(l for _, l in variants) + " |")
        md.append("| --- |" + " --- |" * len(variants))
        cells = []
        for summary, label in variants:
            dec = pct_decrease(base.attack_success_rate, summary.attack_success_rate)
            cells.append(f"{dec:.2f}")
            csv.append(f"asr_pct_decrease,{label},{dec!r}")
        md.append("| ASR decrease (↑) | " + " | ".join(cells) + " |")

    return "\n".join(md) + "\n", "\n".join(csv) + "\n"


def render_figures(
    summaries: Sequence[RunSummary],
    labels: Sequence[str],
    out_dir: str | Path,
    baseline: str | None = None,
) -> list[Path]:
    """Bar charts of the headline numbers, written as PNG files next to the
    tables.  The tables stay the artifact of record; these are a visual aid."""
    _check(summaries, labels)
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    fig, ax = plt.subplots(figsize=(1.6 + 1.2 * len(labels), 4.0))
    x = range(len(labels))
    asr = [s.attack_success_rate * 100 for s in summaries]
    after = [s.after_attack_accuracy * 100 for s in summaries]
    width = 0.38
    ax.bar([i - width / 2 for i in x], asr, width, label="Attack success rate")
    ax.bar([i + width / 2 for i in x], after, width, label="After-attack accuracy")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel("%")
    ax.set_title("Attack outcome by victim variant")
    ax.legend()
    fig.tight_layout()
    path = out / "attack_outcome.png"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)

    if baseline is not None and baseline in labels and len(summaries) > 1:
        base = summaries[list(labels).index(baseline)]
        if base.attack_success_rate > 0:
            variants = [(s, l) for s, l in zip(summaries, labels) if l != baseline]
            decs = [
                pct_decrease(base.attack_success_rate, s.attack_success_rate)
                for s, _ in variants
            ]
            fig, ax = plt.subplots(figsize=(1.6 + 1.2 * len(variants), 4.0))
            ax.bar(range(len(variants)), decs, color="#2a7fba")
            ax.set_xticks(range(len(variants)))
            ax.set_xticklabels([l for _, l in variants], rotation=20, ha="right")
            ax.set_ylabel("% decrease")
            ax.set_title(f"Attack success rate decrease vs {baseline}")
            fig.tight_layout()
            path = out / "asr_decrease.png"
            fig.savefig(path)
            plt.close(fig)
            written.append(path)

    return written
