"""Matplotlib figures rendered next to the delimited report outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .study import A_CHOICES  # noqa: E402

_BAR_COLOR = "#4878a8"
_BASELINE_COLOR = "#b2503c"


def plot_training_curve(history: list[dict], path: str | Path) -> None:
    """Loss and accuracy per epoch, two stacked panels."""
    epochs = [row["epoch"] for row in history]
    fig, (ax_loss, ax_acc) = plt.subplots(2, 1, figsize=(6.4, 6.0), sharex=True)
    ax_loss.plot(epochs, [row["loss"] for row in history], color=_BAR_COLOR)
    ax_loss.set_ylabel("mean cross-entropy")
    ax_loss.grid(alpha=0.3)
    ax_acc.plot(epochs, [row["train_accuracy"] for row in history],
                label="train", color=_BAR_COLOR)
    ax_acc.plot(epochs, [row["heldout_accuracy"] for row in history],
                label="held-out", color=_BASELINE_COLOR)
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("answer accuracy")
    ax_acc.set_ylim(0.0, 1.02)
    ax_acc.grid(alpha=0.3)
    ax_acc.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_pointing_game(results: list[dict], path: str | Path,
                       baseline_method: str = "random") -> None:
    """Accuracy per method; the random baseline shows as a dashed line."""
    results = sorted(results, key=lambda r: r["accuracy"], reverse=True)
    methods = [r["method"] for r in results]
    accs = [r["accuracy"] for r in results]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    colors = [_BASELINE_COLOR if m == baseline_method else _BAR_COLOR
              for m in methods]
    ax.bar(methods, accs, color=colors)
    for r in results:
        if r["method"] == baseline_method:
            ax.axhline(r["accuracy"], color=_BASELINE_COLOR, linestyle="--",
                       linewidth=1, alpha=0.8)
    for i, acc in enumerate(accs):
        ax.text(i, acc + 0.01, f"{acc:.2f}", ha="center", fontsize=9)
    ax.set_ylim(0.0, 1.08)
    ax.set_ylabel("pointing game accuracy")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_vote_distribution(report_obj: dict, path: str | Path) -> None:
    """Stacked vote shares per method plus the aggregate scores."""
    methods = sorted(report_obj["methods"])
    fig, (ax_votes, ax_score) = plt.subplots(1, 2, figsize=(9.6, 4.0))
    shades = ["#2c4f6e", "#4878a8", "#9aa5ad", "#c98a73", "#b2503c"]
    bottom = [0.0] * len(methods)
    for cat, shade in zip(A_CHOICES, shades):
        vals = [report_obj["methods"][m]["percentages"].get(cat, 0.0)
                for m in methods]
        ax_votes.bar(methods, vals, bottom=bottom, label=cat, color=shade)
        bottom = [b + v for b, v in zip(bottom, vals)]
    ax_votes.set_ylabel("vote share (%)")
    ax_votes.legend(fontsize=7)
    scores = [report_obj["methods"][m]["aggregate_score"] for m in methods]
    ax_score.bar(methods, [s if s is not None else 0.0 for s in scores],
                 color=_BAR_COLOR)
    ax_score.axhline(0.5, color="black", linestyle=":", linewidth=1)
    ax_score.set_ylim(0.0, 1.0)
    ax_score.set_ylabel("aggregate score")
    for i, s in enumerate(scores):
        if s is not None:
            ax_score.text(i, s + 0.02, f"{s:.3f}", ha="center", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
