"""Figures for a report directory: one EER heatmap per strategy and an Avg bar chart."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ReportError  # noqa: E402

STYLE = {
    "font.family": "sans-serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
    "savefig.bbox": "tight",
    "savefig.pad_inches": 0.05,
}
# fixed PNG metadata keeps figure bytes reproducible across runs
PNG_METADATA = {"Software": None}


def _save(fig, path: Path):
    try:
        fig.savefig(path, format="png", metadata=PNG_METADATA)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from None
    finally:
        plt.close(fig)
    return path


def matrix_heatmap(eer, task_names, title: str):
    n = len(task_names)
    fig, ax = plt.subplots(figsize=(1.0 + 0.55 * n, 0.8 + 0.5 * n))
    im = ax.imshow(eer, cmap="viridis_r", vmin=0.0, vmax=max(50.0, float(np.max(eer))))
    ax.set_xticks(range(n), task_names, rotation=45, ha="right")
    ax.set_yticks(range(n), task_names)
    ax.set_xlabel("evaluated on")
    ax.set_ylabel("after training on")
    ax.set_title(title)
    for t in range(n):
        for k in range(n):
            ax.text(k, t, f"{eer[t, k]:.1f}", ha="center", va="center", fontsize=6,
                    color="white" if eer[t, k] > 25 else "black")
    fig.colorbar(im, ax=ax, label="EER (%)", shrink=0.8)
    return fig


def avg_bar_chart(grouped: dict):
    names = list(grouped)
    avgs = [[float(np.mean(m.eer[-1])) for m in grouped[n]] for n in names]
    means = [np.mean(a) for a in avgs]
    errs = [np.std(a) for a in avgs]
    fig, ax = plt.subplots(figsize=(1.0 + 0.6 * len(names), 3.0))
    ax.bar(range(len(names)), means, yerr=errs, color="0.6", edgecolor="0.2", capsize=3)
    ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
    ax.set_ylabel("Avg EER after final task (%)")
    ax.set_title(f"mean ± std over {len(avgs[0])} seed(s)")
    return fig


def render_figures(fig_dir, grouped: dict, task_names):
    fig_dir = Path(fig_dir)
    try:
        fig_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create figure directory {fig_dir}: {exc}") from None
    written = []
    with plt.rc_context(STYLE):
        for name, matrices in grouped.items():
            mean = np.mean([m.eer for m in matrices], axis=0)
            fig = matrix_heatmap(mean, task_names, f"{name}: EER (%), mean over {len(matrices)} seed(s)")
            written.append(_save(fig, fig_dir / f"matrix_{name}.png"))
        written.append(_save(avg_bar_chart(grouped), fig_dir / "avg_final.png"))
    return written
