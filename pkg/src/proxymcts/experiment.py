"""Budget-curve experiment on simulated landscapes.

Each (strategy, budget, seed) cell runs on the landscape drawn from that seed,
so strategies are compared on matched problems with identical unit costs.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import binomtest

from .config import RunConfig
from .orchestrator import Orchestrator
from .simulation import (
    DIFFICULTY_FULL_COST,
    Landscape,
    LandscapeConfig,
    SimulatedEvaluator,
    SimulatedGenerator,
    drifting_landscape,
)

log = logging.getLogger(__name__)

Strategy = Literal["archpilot", "no_restart_ablation", "full_eval_only", "random"]
STRATEGIES: tuple[str, ...] = ("archpilot", "no_restart_ablation", "full_eval_only", "random")
CSV_COLUMNS = [
    "strategy", "budget", "seed", "best_true_score",
    "n_proxy_evals", "n_full_evals", "n_restarts",
]


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    strategies: list[Strategy] = Field(default_factory=lambda: ["archpilot", "full_eval_only"])
    budgets: list[float] = Field(default_factory=lambda: [20.0, 40.0, 60.0, 100.0])
    seeds: int = Field(default=100, gt=0)
    first_seed: int = 0
    difficulty: Literal["low", "medium", "high"] | None = "high"
    # explicit costs override the difficulty preset
    full_cost: float | None = Field(default=None, gt=0)
    proxy_cost: float | None = Field(default=None, gt=0)
    landscape: LandscapeConfig = Field(default_factory=LandscapeConfig)
    run: RunConfig = Field(default_factory=RunConfig)
    workers: int = Field(default=1, ge=1)
    out: str | None = None

    @model_validator(mode="after")
    def _costs(self):
        full, proxy = self.costs()
        if proxy >= full:
            raise ValueError("proxy_cost must be below full_cost")
        return self

    def costs(self) -> tuple[float, float]:
        full = self.full_cost
        if full is None:
            full = DIFFICULTY_FULL_COST[self.difficulty or "low"]
        proxy = self.proxy_cost if self.proxy_cost is not None else full / 10.0
        return full, proxy


def drift_experiment(seeds: int = 100, budget: float = 100.0) -> ExperimentConfig:
    """Restart ablation: the trusted one-epoch proxy flips sign mid-run.

    The registry starts with most weight on the drifting proxy, as it would
    after it had proven reliable early on.
    """
    run = RunConfig()
    run.registry.proxies = [
        {"name": "one_epoch", "direction": -1, "weight": 0.8},
        {"name": "noisy", "direction": -1, "weight": 0.1},
        {"name": "dropout", "direction": -1, "weight": 0.1},
    ]
    return ExperimentConfig(
        strategies=["archpilot", "no_restart_ablation"], budgets=[budget], seeds=seeds,
        difficulty="medium", landscape=drifting_landscape(), run=run,
    )


@dataclass
class Row:
    strategy: str
    budget: float
    seed: int
    best_true_score: float
    n_proxy_evals: int
    n_full_evals: int
    n_restarts: int


def strategy_config(base: RunConfig, strategy: str, budget: float, full: float, proxy: float,
                    seed: int, landscape: LandscapeConfig) -> RunConfig:
    cfg = base.model_copy(deep=True)
    cfg.seed = seed
    cfg.landscape = landscape
    cfg.budget.total_units = budget
    cfg.budget.full_cost = full
    cfg.budget.proxy_cost = proxy
    if strategy == "full_eval_only":
        cfg.budget.proxy_mode = False
    elif strategy == "no_restart_ablation":
        cfg.search.restarts = False
    return cfg


def run_random(land: Landscape, budget: float, full_cost: float, seed: int) -> Row:
    """Full-evaluate grid points in a random order.

    A point that crashes is retried on a later pass, where each attempt fixes
    it with the landscape's q_fix probability.
    """
    rng = np.random.default_rng([seed, 0x4A7D])
    pending = [int(i) for i in rng.permutation(land.cfg.levels**land.dim)]
    first_pass = True
    best = 0.0
    n_full = 0
    remaining = budget
    while pending:
        retry = []
        for idx in pending:
            if remaining + 1e-9 < full_cost:
                return Row("random", budget, seed, best, 0, n_full, 0)
            remaining -= full_cost
            n_full += 1
            p = land.index_to_point(idx)
            crashed = land.is_buggy(p) if first_pass else rng.random() >= land.cfg.q_fix
            if crashed:
                retry.append(idx)
            else:
                best = max(best, land.true_score(p))
        pending, first_pass = retry, False
    return Row("random", budget, seed, best, 0, n_full, 0)


def run_strategy(strategy: str, cfg: RunConfig) -> Row:
    land = Landscape(cfg.landscape, seed=cfg.seed)
    if strategy == "random":
        return run_random(land, cfg.budget.total_units, cfg.budget.full_cost, cfg.seed)
    orch = Orchestrator(cfg, SimulatedGenerator(land, seed=cfg.seed), SimulatedEvaluator(land))
    result = orch.run()
    best = orch.best_node()
    score = 0.0 if best is None else land.true_score(best.payload.meta["point"])
    return Row(strategy, cfg.budget.total_units, cfg.seed, score,
               result.n_proxy_evals, result.n_full_evals, result.n_restarts)


def _cell(args) -> Row:
    return run_strategy(*args)


def budget_curve_experiment(cfg: ExperimentConfig) -> list[Row]:
    full, proxy = cfg.costs()
    jobs = []
    for budget in cfg.budgets:
        for seed in range(cfg.first_seed, cfg.first_seed + cfg.seeds):
            for strategy in cfg.strategies:
                rc = strategy_config(cfg.run, strategy, budget, full, proxy, seed, cfg.landscape)
                jobs.append((strategy, rc))
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(_cell, jobs, chunksize=8))
    else:
        rows = [_cell(j) for j in jobs]
    return rows


def summarize(rows: list[Row]) -> dict:
    """Mean and std of best true score per strategy and budget."""
    out: dict[str, dict] = {}
    keys = sorted({(r.strategy, r.budget) for r in rows})
    for strategy, budget in keys:
        vals = np.array([r.best_true_score for r in rows if r.strategy == strategy and r.budget == budget])
        out.setdefault(strategy, {"budget": [], "mean": [], "std": [], "n": []})
        s = out[strategy]
        s["budget"].append(budget)
        s["mean"].append(float(vals.mean()))
        s["std"].append(float(vals.std(ddof=1)) if len(vals) > 1 else 0.0)
        s["n"].append(int(len(vals)))
    return out


def paired_sign_test(a: list[float], b: list[float]) -> tuple[int, int, float]:
    """One-sided sign test that a tends to exceed b; ties are dropped.

    Returns (wins, losses, p-value).
    """
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    wins = int((diff > 0).sum())
    losses = int((diff < 0).sum())
    if wins + losses == 0:
        return 0, 0, 1.0
    return wins, losses, float(binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue)


def scores_by_seed(rows: list[Row], strategy: str, budget: float) -> list[float]:
    sel = sorted((r for r in rows if r.strategy == strategy and r.budget == budget), key=lambda r: r.seed)
    return [r.best_true_score for r in sel]


def write_csv(rows: list[Row], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(asdict(r))


def write_outputs(rows: list[Row], out_dir: str | Path, cfg: ExperimentConfig | None = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(rows, out / "budget_curve.csv")
    summary = summarize(rows)
    doc = {"summary": summary}
    if cfg is not None:
        doc["config"] = cfg.model_dump(mode="json")
    (out / "budget_curve.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    from .plotting import plot_budget_curve

    plot_budget_curve(summary, out / "budget_curve.png")
    return summary
