"""TSV renderers and matplotlib figures for training and comparison runs."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

METRICS_HEADER = "method\tBLEU\tdistinct-1\tdistinct-2"
SELECTION_HEADER = "message\tstrategy\tselected_index\tresponse\tlog_prob"


def metrics_tsv(rows) -> str:
    """``rows`` are ``(method, MetricsReport)``; BLEU is printed as a percentage."""
    out = [METRICS_HEADER]
    for method, rep in rows:
        out.append(f"{method}\t{100.0 * rep.bleu:.2f}\t{rep.distinct1:.3f}\t{rep.distinct2:.3f}")
    return "\n".join(out) + "\n"


def selection_tsv(records) -> str:
    """``records`` are ``(message_text, SelectionRow, response_text)``."""
    out = [SELECTION_HEADER]
    for message, row, response in records:
        out.append(f"{message}\t{row.strategy}\t{row.index_text()}\t{response}\t{row.log_prob:.6f}")
    return "\n".join(out) + "\n"


def train_log_tsv(log) -> str:
    return "".join(rec.line() + "\n" for rec in log)


def _save(fig, path) -> None:
    fig.tight_layout()
    # no timestamp/software metadata so reruns give identical files
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def plot_training(log, path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    epochs = [r.epoch for r in log]
    ax.plot(epochs, [r.train_loss for r in log], marker="o", ms=3, label="train")
    ax.plot(epochs, [r.valid_loss for r in log], marker="s", ms=3, label="valid")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss per token")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    _save(fig, path)
    return Path(path)


def plot_metrics(rows: Sequence, path) -> Path:
    names = [m for m, _ in rows]
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.6), sharey=False)
    panels = [
        ("BLEU (x100)", [100.0 * r.bleu for _, r in rows]),
        ("distinct-1", [r.distinct1 for _, r in rows]),
        ("distinct-2", [r.distinct2 for _, r in rows]),
    ]
    ypos = list(range(len(names)))
    for ax, (label, values) in zip(axes, panels):
        ax.barh(ypos, values, color="0.55")
        ax.set_yticks(ypos)
        ax.set_yticklabels(names if ax is axes[0] else [""] * len(names), fontsize=8)
        ax.invert_yaxis()
        ax.set_title(label, fontsize=9)
    _save(fig, path)
    return Path(path)
