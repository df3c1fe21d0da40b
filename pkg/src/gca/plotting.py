"""Report figures, written next to report.json."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    # keep PNG output stable across runs
    "svg.hashsalt": "gca",
}

COLORS = {"fact": "#2b7bba", "hallucination": "#d7301f"}


def _save(fig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else None)
    plt.close(fig)
    return path


def plot_score_distribution(report: dict, path: Union[str, Path]) -> Path:
    """Histogram of triple fused scores split by the response's gold label."""
    by_label: dict[str, list[float]] = {"fact": [], "hallucination": []}
    for s in report["samples"]:
        for t in s["triples"]:
            by_label[s["label"]].append(t["fused"])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        values = [v for vs in by_label.values() for v in vs]
        bins = 20 if values else 1
        for label, vs in by_label.items():
            if vs:
                ax.hist(vs, bins=bins, range=(min(values), max(values) or 1.0), alpha=0.6,
                        color=COLORS[label], label=f"{label} responses ({len(vs)} triples)")
        if report.get("tau") is not None:
            ax.axvline(report["tau"], color="k", lw=1, ls="--", label=f"threshold {report['tau']:.3g}")
        ax.set_xlabel("fused triple score")
        ax.set_ylabel("count")
        if values:
            ax.legend(frameon=False)
        return _save(fig, path)


def plot_calibration(calibration: dict, path: Union[str, Path], title: Optional[str] = None) -> Path:
    """Objective value over the threshold grid, chosen threshold marked."""
    grid = calibration.get("grid") or [[calibration["chosen_threshold"], float("nan")]]
    xs = [g[0] for g in grid]
    ys = [g[1] for g in grid]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        ax.plot(xs, ys, color="#444444", lw=1.2, marker="." if len(xs) < 30 else None)
        ax.axvline(calibration["chosen_threshold"], color=COLORS["hallucination"], lw=1, ls="--",
                   label=f"chosen {calibration['chosen_threshold']:.3g}")
        ax.axvline(calibration["mean"], color="#999999", lw=0.8, ls=":", label="mean")
        ax.set_xlabel("threshold")
        ax.set_ylabel(calibration["objective"])
        ax.set_title(title or "threshold calibration")
        ax.legend(frameon=False)
        return _save(fig, path)
