import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from oracles import exact_ridge, simplex_oracle
from proxymcts.cli import EXIT_CONFIG, EXIT_MISMATCH, EXIT_OK, main


def search(tmp_path, name="run", *extra):
    out = tmp_path / name
    code = main(["search", "--out", str(out), "--no-plot", "--set", "budget.total_units=25", *extra])
    return code, out


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def fit_output(capsys, *argv):
    code = main(["fit", *argv])
    return code, capsys.readouterr().out


# -- search ------------------------------------------------------------------

def test_search_writes_self_describing_directory(tmp_path, capsys):
    code, out = search(tmp_path)
    assert code == EXIT_OK
    for f in ("config.json", "journal.jsonl", "result.json", "summary.txt"):
        assert (out / f).exists()
    assert "stop reason" in capsys.readouterr().out
    assert main(["replay", str(out / "journal.jsonl")]) == EXIT_OK
    assert "replay verified" in capsys.readouterr().out


def test_search_plot(tmp_path):
    out = tmp_path / "p"
    assert main(["search", "--out", str(out), "--set", "budget.total_units=15"]) == EXIT_OK
    assert (out / "trace.png").stat().st_size > 0


def test_same_seed_gives_identical_files(tmp_path):
    _, a = search(tmp_path, "a", "--seed", "1")
    _, b = search(tmp_path, "b", "--seed", "1")
    for f in ("result.json", "journal.jsonl"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_different_seed_differs(tmp_path):
    _, a = search(tmp_path, "a", "--seed", "1")
    _, b = search(tmp_path, "b", "--seed", "2")
    assert (a / "journal.jsonl").read_bytes() != (b / "journal.jsonl").read_bytes()


@pytest.mark.parametrize("alpha", ["0", "-1"])
def test_nonpositive_alpha_is_config_error(tmp_path, capsys, alpha):
    code, _ = search(tmp_path, "x", "--set", f"fit.alpha={alpha}")
    assert code == EXIT_CONFIG
    assert "fit.alpha" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path, capsys):
    code, _ = search(tmp_path, "x", "--set", "fit.alpah=1")
    assert code == EXIT_CONFIG
    assert "alpah" in capsys.readouterr().err


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("seed: 5\nbudget:\n  total_units: 40\nfit:\n  alpha: 2.0\n")
    out = tmp_path / "o"
    code = main(["search", "--config", str(cfg), "--seed", "7", "--out", str(out), "--no-plot",
                 "--set", "fit.alpha=3.0"])
    assert code == EXIT_OK
    eff = json.loads((out / "config.json").read_text())
    assert eff["seed"] == 7
    assert eff["fit"]["alpha"] == 3.0
    assert eff["budget"]["total_units"] == 40


def test_missing_config_file(tmp_path):
    assert main(["search", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_global_flags_before_subcommand(tmp_path):
    out = tmp_path / "g"
    assert main(["--seed", "3", "--log-level", "WARNING", "search", "--out", str(out), "--no-plot",
                 "--set", "budget.total_units=12"]) == EXIT_OK
    assert json.loads((out / "config.json").read_text())["seed"] == 3


# -- fit ---------------------------------------------------------------------

def test_fit_single_proxy(tmp_path, capsys):
    p = write_csv(tmp_path / "a.csv", ["y", "loss:-1"], [[0.2, 3.0], [0.5, 2.0], [0.9, 1.0]])
    code, out = fit_output(capsys, str(p))
    assert code == EXIT_OK
    assert json.loads(out) == {"weights": [1.0]}


def test_fit_sentinel_column_gets_zero(tmp_path, capsys):
    rows = [[0.1, 0.3, 0.2], [0.5, 0.6, 1e9], [0.9, 0.8, 0.9], [0.4, 0.5, 0.1]]
    p = write_csv(tmp_path / "s.csv", ["y", "acc:+1", "agree:+1"], rows)
    code, out = fit_output(capsys, str(p), "-v")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["weights"][1] == 0.0
    assert doc["weights"][0] == 1.0
    assert doc["ever_failed"] == [False, True]


def test_fit_matches_oracle_example(tmp_path, capsys):
    Z = [[1, 0], [0, 1], [1, 0], [0, 1], [1, 1]]
    Y = [1, 0, 1, 0, 1]
    p = write_csv(tmp_path / "f.csv", ["y", "a:+1", "b:+1"], [[y, *z] for y, z in zip(Y, Z)])
    code, out = fit_output(capsys, str(p), "--alpha", "0.01", "--raw")
    assert code == EXIT_OK
    want = simplex_oracle(exact_ridge(np.array(Z, float), np.array(Y, float), 0.01))
    assert np.allclose(json.loads(out)["weights"], want, atol=1e-9, rtol=0)


@pytest.mark.parametrize("header, rows", [
    (["y", "loss"], [[1, 2]]),
    (["score", "loss:-1"], [[1, 2]]),
    (["y", "loss:-1"], [[1, "abc"]]),
    (["y", "loss:-1"], [[1, 2, 3]]),
    (["y", "a:+1", "a:-1"], [[1, 2, 3]]),
])
def test_fit_parse_errors(tmp_path, capsys, header, rows):
    p = write_csv(tmp_path / "bad.csv", header, rows)
    assert fit_output(capsys, str(p))[0] == EXIT_CONFIG


def test_fit_insufficient_pairs(tmp_path, capsys):
    p = write_csv(tmp_path / "few.csv", ["y", "loss:-1"], [[1, 2]])
    assert fit_output(capsys, str(p), "--min-pairs", "5")[0] == EXIT_CONFIG


def test_fit_bad_alpha(tmp_path, capsys):
    p = write_csv(tmp_path / "a.csv", ["y", "loss:-1"], [[1, 2]])
    assert fit_output(capsys, str(p), "--alpha", "0")[0] == EXIT_CONFIG


# -- replay ------------------------------------------------------------------

def test_replay_detects_deleted_entry(tmp_path, capsys):
    _, out = search(tmp_path)
    j = out / "journal.jsonl"
    lines = j.read_text().splitlines(keepends=True)
    del lines[len(lines) // 2]
    j.write_text("".join(lines))
    capsys.readouterr()
    assert main(["replay", str(j)]) == EXIT_MISMATCH
    assert "MISMATCH" in capsys.readouterr().out


def test_replay_detects_edited_result(tmp_path, capsys):
    _, out = search(tmp_path)
    res = json.loads((out / "result.json").read_text())
    res["n_full_evals"] += 1
    (out / "result.json").write_text(json.dumps(res))
    assert main(["replay", str(out / "journal.jsonl")]) == EXIT_MISMATCH


def test_replay_empty_journal(tmp_path, capsys):
    j = tmp_path / "journal.jsonl"
    j.write_text("")
    assert main(["replay", str(j)]) == EXIT_OK
    assert "empty tree" in capsys.readouterr().out


def test_replay_corrupt_journal(tmp_path):
    j = tmp_path / "journal.jsonl"
    j.write_text("{not json\n")
    assert main(["replay", str(j)]) == EXIT_CONFIG


# -- experiment --------------------------------------------------------------

def test_experiment_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text("strategies: [archpilot, random]\nbudgets: [10, 20]\nseeds: 3\n")
    out = tmp_path / "exp"
    assert main(["experiment", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    for f in ("budget_curve.csv", "budget_curve.json", "budget_curve.png"):
        assert (out / f).exists()
    with open(out / "budget_curve.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 2 * 2 * 3
    assert "archpilot vs random" in capsys.readouterr().out


def test_experiment_bad_config(tmp_path):
    assert main(["experiment", "--set", "strategies=[greedy]", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "proxymcts", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("search", "fit", "replay", "experiment"):
        assert cmd in r.stdout
