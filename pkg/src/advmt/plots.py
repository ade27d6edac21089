"""Matplotlib figures rendered next to the delimited outputs."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _parse_log(path):
    steps, j_eval, j_adv1, j_adv2, dev = [], [], [], [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        cols = line.split("\t")
        steps.append(int(cols[0]))
        j_eval.append(float(cols[2]))
        j_adv1.append(float(cols[3]))
        j_adv2.append(float(cols[4]))
        if cols[6]:
            dev.append((int(cols[0]), float(cols[6])))
    return steps, j_eval, j_adv1, j_adv2, dev


def render_training_curves(log_path, out_path) -> Path:
    """Loss curves plus dev ranking accuracy, from a training-log TSV."""
    steps, j_eval, j_adv1, j_adv2, dev = _parse_log(log_path)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 7), sharex=True)
    ax1.plot(steps, j_eval, label="J_eval", lw=1)
    if any(v != 0.0 for v in j_adv1):
        ax1.plot(steps, j_adv1, label="J_adv1", lw=1, alpha=0.7)
        ax1.plot(steps, j_adv2, label="J_adv2", lw=1, alpha=0.7)
    ax1.set_ylabel("loss")
    ax1.legend()
    if dev:
        xs, ys = zip(*dev)
        ax2.plot(xs, ys, marker="o", color="tab:green")
    ax2.set_ylabel("dev ranking accuracy")
    ax2.set_xlabel("step")
    ax2.set_ylim(0, 1.05)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_eval_figures(pairs, metric_names, report, outdir) -> list[Path]:
    """Scatter of each metric against human scores, plus a correlation bar
    chart; returns the written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    human = [p.human_score for p in pairs]

    for name in metric_names:
        scores = [p.metric_scores[name] for p in pairs]
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.scatter(human, scores, s=14, alpha=0.6)
        ax.set_xlabel("human score")
        ax.set_ylabel(name)
        corr = report.metrics.get(name)
        title = name
        if corr is not None:
            title += f"  (pearson {corr.pearson:.3f}, spearman {corr.spearman:.3f})"
        ax.set_title(title, fontsize=10)
        fig.tight_layout()
        path = outdir / f"scatter_{name.replace('+', '_')}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    if report.metrics:
        names = list(report.metrics)
        pearsons = [report.metrics[n].pearson for n in names]
        spearmans = [report.metrics[n].spearman for n in names]
        fig, ax = plt.subplots(figsize=(max(5, 0.9 * len(names) + 2), 4))
        xs = range(len(names))
        ax.bar([x - 0.2 for x in xs], pearsons, width=0.4, label="pearson")
        ax.bar([x + 0.2 for x in xs], spearmans, width=0.4, label="spearman")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(names, rotation=30, ha="right")
        ax.set_ylabel("correlation with human scores")
        ax.axhline(0, color="black", lw=0.8)
        ax.legend()
        fig.tight_layout()
        path = outdir / "correlations.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
