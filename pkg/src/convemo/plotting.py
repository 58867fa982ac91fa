"""Figure rendering for the report-producing CLI paths.

Every report command writes its figures next to the delimited/JSON
output.  All functions render straight to a file with the Agg backend,
no display needed.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .corpus import CLASS_ORDER, Label
from .eval import AblationReport, EvalReport, Thresholds

_CLASS_NAMES = [label.value for label in CLASS_ORDER]
_EMOTION_NAMES = _CLASS_NAMES[:3]


def save_confusion_matrix(report: EvalReport, path: str | Path) -> Path:
    """Heatmap of the 4x4 confusion matrix with annotated counts."""
    matrix = np.array(report.confusion)
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    im = ax.imshow(matrix, cmap="Blues")
    ax.set_xticks(range(4), _CLASS_NAMES)
    ax.set_yticks(range(4), _CLASS_NAMES)
    ax.set_xlabel("predicted")
    ax.set_ylabel("gold")
    ax.set_title(f"Confusion matrix (micro F1 = {report.micro_f1:.4f})")
    cutoff = matrix.max() / 2 if matrix.max() else 0.5
    for i in range(4):
        for j in range(4):
            ax.text(j, i, str(matrix[i, j]), ha="center", va="center",
                    color="white" if matrix[i, j] > cutoff else "black")
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_class_f1(report: EvalReport, path: str | Path) -> Path:
    """Bar chart of per-emotion F1 with the micro average marked."""
    values = [report.per_class[label].f1 for label in CLASS_ORDER[:3]]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    bars = ax.bar(_EMOTION_NAMES, values, color=["#e8b23a", "#4878a8", "#b5413b"])
    ax.axhline(report.micro_f1, color="black", linestyle="--", linewidth=1,
               label=f"micro F1 = {report.micro_f1:.4f}")
    ax.bar_label(bars, fmt="%.3f")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("F1")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_ablation_gains(report: AblationReport, path: str | Path) -> Path:
    """Horizontal bars: micro-F1 gain contributed by each dropped block."""
    names = [row.name for row in report.rows]
    gains = [row.gain for row in report.rows]
    fig, ax = plt.subplots(figsize=(6.4, 0.45 * len(names) + 1.6))
    ypos = np.arange(len(names))
    ax.barh(ypos, gains, color="#4878a8")
    ax.set_yticks(ypos, names)
    ax.invert_yaxis()
    ax.axvline(0, color="black", linewidth=0.8)
    ax.set_xlabel("micro-F1 gain of the dropped features")
    ax.set_title(f"Hold-one-out ablation (full micro F1 = {report.full_micro_f1:.4f})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_class_distribution(stats, path: str | Path) -> Path:
    """Bar chart of the label distribution from dataset statistics."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    if stats.class_pct is not None:
        values = [stats.class_pct[label] for label in CLASS_ORDER]
        bars = ax.bar(_CLASS_NAMES, values,
                      color=["#e8b23a", "#4878a8", "#b5413b", "#8a8a8a"])
        ax.bar_label(bars, fmt="%.1f%%")
        ax.set_ylabel("share of conversations (%)")
    else:
        ax.text(0.5, 0.5, "unlabelled dataset", ha="center", va="center")
        ax.set_axis_off()
    ax.set_title(f"{stats.example_count} conversations, "
                 f"{stats.emoji_pct:.1f}% with emoji")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_threshold_curves(probas, golds, tuned: Thresholds, path: str | Path,
                          step: float = 0.01) -> Path:
    """Micro F1 as each threshold sweeps its grid, others held at tuned."""
    from .eval import Thresholds as Th
    from .eval import _as_label_ints, _micro_f1_from_ints, apply_thresholds_batch

    probas = np.asarray(probas, dtype=np.float64)
    gold = _as_label_ints(golds)
    steps = max(1, int(round(1.0 / step)))
    grid = np.array([i / steps for i in range(steps + 1)])
    tuned_values = {"happy": tuned.happy, "sad": tuned.sad, "angry": tuned.angry}

    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    for name, color in zip(("happy", "sad", "angry"), ("#e8b23a", "#4878a8", "#b5413b")):
        f1s = []
        for value in grid:
            trial = dict(tuned_values)
            trial[name] = float(value)
            pred = apply_thresholds_batch(probas, Th(**trial))
            f1s.append(_micro_f1_from_ints(gold, pred))
        ax.plot(grid, f1s, label=name, color=color)
        ax.plot([tuned_values[name]], [f1s[int(round(tuned_values[name] * steps))]],
                "o", color=color)
    ax.set_xlabel("threshold")
    ax.set_ylabel("micro F1")
    ax.set_title("Threshold sweeps around the tuned point")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
