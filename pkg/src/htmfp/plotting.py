"""Report figures rendered to files with the non-interactive backend."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import (FAULT_LABELS, REFERENCE_FAULT_TABLE, ConfigReport, FaultRow,  # noqa: E402
                         epsilon_aggregates)
from .global_prediction import SINGLE, VOTE  # noqa: E402

_TITLES = {VOTE: "vote-based", SINGLE: "single-resource"}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps repeated renders byte-stable
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_epsilon_performance(reports: list[ConfigReport], path: Path) -> Path:
    """Mean precision, recall and F-measure per epsilon, one panel per strategy."""
    agg = epsilon_aggregates(reports)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, strategy in zip(axes, (VOTE, SINGLE)):
        rows = [r for r in agg if r["strategy"] == strategy]
        eps = [r["epsilon"] for r in rows]
        for key, marker in (("precision", "o"), ("recall", "s"), ("f_measure", "^")):
            ax.plot(eps, [r[key] for r in rows], marker=marker, label=key.replace("_", "-"))
        ax.set_title(_TITLES[strategy])
        ax.set_xlabel("epsilon")
        ax.set_xticks(eps)
        ax.set_ylim(0, 1.05)
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("mean over configurations")
    axes[0].legend(loc="lower left")
    fig.tight_layout()
    return _save(fig, path)


def plot_lead_times(outcomes: dict, path: Path) -> Path:
    """Distribution of lead times of correct predictions per epsilon and strategy."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, strategy in zip(axes, (VOTE, SINGLE)):
        eps_values = sorted({c.epsilon for c in outcomes if c.strategy == strategy})
        data = []
        for eps in eps_values:
            data.append([o.lead_min for c, runs in outcomes.items()
                         if c.strategy == strategy and c.epsilon == eps
                         for o in runs if o.lead_min is not None])
        positions = range(1, len(eps_values) + 1)
        ax.boxplot([d or [float("nan")] for d in data], positions=list(positions))
        ax.set_xticks(list(positions), [f"{e:.2f}" for e in eps_values])
        ax.set_title(_TITLES[strategy])
        ax.set_xlabel("epsilon")
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("lead time (min)")
    fig.tight_layout()
    return _save(fig, path)


def plot_fault_table(rows: list[FaultRow], path: Path) -> Path:
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 3.5))
    names = [FAULT_LABELS.get(r.fault_type, r.fault_type) for r in rows]
    ref = [REFERENCE_FAULT_TABLE.get(r.fault_type, (float("nan"), float("nan"))) for r in rows]
    left.barh(names, [r.recall for r in rows], color="tab:blue", label="simulated")
    left.scatter([x[0] for x in ref], names, marker="D", color="black", zorder=3, label="reference")
    left.set_xlim(0, 1)
    left.set_xlabel("recall")
    left.legend(loc="lower right", fontsize=8)
    right.barh(names, [r.median_lead or 0.0 for r in rows], color="tab:orange")
    right.scatter([x[1] for x in ref], names, marker="D", color="black", zorder=3)
    right.set_xlabel("median lead time (min)")
    right.set_yticks([])
    for ax in (left, right):
        ax.invert_yaxis()
        ax.grid(axis="x", alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)
