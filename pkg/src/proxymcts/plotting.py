"""Figures written next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

LABELS = {
    "archpilot": "proxy-guided search",
    "no_restart_ablation": "no restart",
    "full_eval_only": "full evaluation only",
    "random": "random",
}


def plot_budget_curve(summary: dict, path: str | Path) -> None:
    """Mean best true score against budget, shaded by one standard deviation."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for strategy, s in summary.items():
        x, mean, std = s["budget"], s["mean"], s["std"]
        ax.plot(x, mean, marker="o", label=LABELS.get(strategy, strategy))
        ax.fill_between(x, [m - d for m, d in zip(mean, std)],
                        [m + d for m, d in zip(mean, std)], alpha=0.15)
    ax.set_xlabel("budget (cost units)")
    ax.set_ylabel("best true score")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_search_trace(journal: list[dict], path: str | Path) -> None:
    """Best true score so far against cumulative spend for one search run."""
    spent_at: dict[int, float] = {}
    total = 0.0
    for e in journal:
        if e["event"] == "BudgetCharged":
            total += e["detail"]["cost"]
        spent_at[e["seq"]] = total
    xs, ys = [0.0], [None]
    best = None
    for e in journal:
        if e["event"] != "FullEvaluated":
            continue
        y = e["detail"].get("true_score")
        if y is not None and (best is None or y > best):
            best = y
        xs.append(spent_at[e["seq"]])
        ys.append(best)
    restarts = [spent_at[e["seq"]] for e in journal if e["event"] == "Restart"]

    fig, ax = plt.subplots(figsize=(6, 4))
    pts = [(x, y) for x, y in zip(xs, ys) if y is not None]
    if pts:
        ax.step([p[0] for p in pts], [p[1] for p in pts], where="post")
    for i, r in enumerate(restarts):
        ax.axvline(r, color="grey", ls="--", lw=0.8, label="restart" if i == 0 else None)
    ax.set_xlabel("budget spent (cost units)")
    ax.set_ylabel("best true score so far")
    if restarts:
        ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
