import csv
import json

import numpy as np
import pytest

from proxymcts.experiment import (
    CSV_COLUMNS,
    ExperimentConfig,
    budget_curve_experiment,
    paired_sign_test,
    run_random,
    scores_by_seed,
    strategy_config,
    summarize,
    write_outputs,
)
from proxymcts.simulation import Landscape, LandscapeConfig


def small(**kw):
    base = dict(strategies=["archpilot", "no_restart_ablation", "full_eval_only", "random"],
                budgets=[10.0, 20.0], seeds=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_rows_and_outputs(tmp_path):
    cfg = small()
    rows = budget_curve_experiment(cfg)
    assert len(rows) == 4 * 2 * 3
    summary = write_outputs(rows, tmp_path, cfg)
    with open(tmp_path / "budget_curve.csv") as fh:
        table = list(csv.DictReader(fh))
    assert list(table[0]) == CSV_COLUMNS
    assert len(table) == len(rows)
    doc = json.loads((tmp_path / "budget_curve.json").read_text())
    assert doc["summary"] == summary
    assert set(summary) == set(cfg.strategies)
    assert (tmp_path / "budget_curve.png").stat().st_size > 0


def test_experiment_is_deterministic():
    a = budget_curve_experiment(small(budgets=[15.0]))
    b = budget_curve_experiment(small(budgets=[15.0]))
    assert a == b


def test_parallel_matches_serial():
    cfg = small(budgets=[15.0], seeds=2)
    assert budget_curve_experiment(cfg) == budget_curve_experiment(cfg.model_copy(update={"workers": 2}))


def test_matched_costs_across_strategies():
    cfg = small()
    full, proxy = cfg.costs()
    assert (full, proxy) == (10.0, 1.0)
    for s in cfg.strategies:
        rc = strategy_config(cfg.run, s, 20.0, full, proxy, 0, cfg.landscape)
        assert (rc.budget.full_cost, rc.budget.proxy_cost) == (full, proxy)


def test_strategy_switches():
    cfg = small()
    rc = strategy_config(cfg.run, "no_restart_ablation", 20.0, 10.0, 1.0, 0, cfg.landscape)
    assert not rc.search.restarts and rc.budget.proxy_mode
    rc = strategy_config(cfg.run, "full_eval_only", 20.0, 10.0, 1.0, 0, cfg.landscape)
    assert not rc.budget.proxy_mode


def test_costs_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(full_cost=1.0, proxy_cost=2.0)
    with pytest.raises(ValueError):
        ExperimentConfig(strategies=["greedy"])
    assert ExperimentConfig(difficulty="low").costs() == (1.0, 0.1)


def test_random_baseline_budget_and_determinism():
    land = Landscape(LandscapeConfig(), seed=3)
    r = run_random(land, 35.0, 10.0, seed=3)
    assert r.n_full_evals == 3
    assert r == run_random(land, 35.0, 10.0, seed=3)
    assert 0.0 <= r.best_true_score <= land.optimum


def test_random_baseline_exhausts_small_grid():
    land = Landscape(LandscapeConfig(dim=2, levels=3, buggy_fraction=0.0), seed=1)
    r = run_random(land, 1000.0, 1.0, seed=0)
    assert r.best_true_score == land.optimum
    assert r.n_full_evals == 9


def test_sign_test():
    w, l, p = paired_sign_test([1, 2, 3, 4], [0, 2, 1, 5])
    assert (w, l) == (2, 1)
    assert p == pytest.approx(0.5)
    assert paired_sign_test([1.0], [1.0]) == (0, 0, 1.0)


def test_summarize_stats():
    rows = budget_curve_experiment(small(strategies=["random"], budgets=[30.0], seeds=4))
    s = summarize(rows)["random"]
    vals = scores_by_seed(rows, "random", 30.0)
    assert s["mean"] == [pytest.approx(np.mean(vals))]
    assert s["std"] == [pytest.approx(np.std(vals, ddof=1))]


@pytest.mark.slow
def test_tight_budget_favors_proxy_guidance():
    cfg = ExperimentConfig(strategies=["archpilot", "full_eval_only"], budgets=[20.0], seeds=100)
    rows = budget_curve_experiment(cfg)
    a = scores_by_seed(rows, "archpilot", 20.0)
    b = scores_by_seed(rows, "full_eval_only", 20.0)
    assert np.mean(a) > np.mean(b)
    assert paired_sign_test(a, b)[2] < 0.05
