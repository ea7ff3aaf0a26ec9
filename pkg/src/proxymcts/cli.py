"""Command-line entry points: search, fit, replay, experiment.

Exit codes: 0 completed, 1 replay mismatch, 2 bad config or input,
3 environment problem (unwritable output, unreachable backend).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from .config import ConfigError, RunConfig, load_config, parse_override
from .journal import CorruptJournal, Event, Journal, dumps, read_journal, verify

log = logging.getLogger("proxymcts")

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_ENV = 3


class ParseError(Exception):
    pass


def _overrides(args) -> dict[str, Any]:
    out = dict(parse_override(item) for item in getattr(args, "set", None) or [])
    for flag, key in (("seed", "seed"), ("out", "out"), ("workers", "workers")):
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


# -- search ----------------------------------------------------------------

def build_agents(cfg: RunConfig, journal: Journal):
    """Generation and evaluation agents for the configured backend, plus a clock."""
    from .orchestrator import SimClock, WallClock

    if cfg.agents.backend == "simulated":
        from .simulation import Landscape, SimulatedEvaluator, SimulatedGenerator

        land = Landscape(cfg.landscape, seed=cfg.seed)
        clock = SimClock(cfg.budget.seconds_per_unit)
        return SimulatedGenerator(land, seed=cfg.seed), SimulatedEvaluator(land), clock

    from .agents import LLMGenerator, SandboxEvaluator

    llm = cfg.agents.llm
    sb = cfg.agents.sandbox
    gen = LLMGenerator(
        base_url=llm.base_url, model=llm.model, temperature=llm.temperature,
        token_env=llm.token_env, timeout=llm.timeout, retries=llm.retries,
        on_exchange=lambda req, resp: journal.append(
            None, Event.AGENT_EXCHANGE, request=req, response=resp
        ),
    )
    ev = SandboxEvaluator(
        artifact_name=sb.artifact_name, noise_frac=sb.noise_frac,
        mask_frac=sb.mask_frac, seed=cfg.seed,
    )
    return gen, ev, WallClock()


def summary_text(result: dict) -> str:
    b = result["budget"]
    lines = [
        f"stop reason:        {result['stop_reason']}",
        f"best node:          {result['best_node']}",
        f"best true score:    {result['best_true_score']}",
        f"best proxy score:   {result['best_aggregated_score']}",
        f"no valid candidate: {result['no_valid_candidate']}",
        f"budget:             {b['spent']:g} of {b['total']:g} units spent",
        f"evaluations:        {result['n_proxy_evals']} proxy, {result['n_full_evals']} full",
        f"restarts:           {result['n_restarts']}",
        f"journal entries:    {result['n_journal_entries']}",
    ]
    weights = result["weight_history"][-1]["weights"] if result["weight_history"] else []
    if weights:
        lines.append("final weights:      " + ", ".join(f"{w:.4f}" for w in weights))
    payload = result.get("best_payload")
    if payload:
        lines += ["", "best plan:", payload.get("plan", "")]
    return "\n".join(lines) + "\n"


def cmd_search(args) -> int:
    from .orchestrator import run_search

    cfg = load_config(args.config, _overrides(args))
    out = Path(cfg.out or f"runs/seed-{cfg.seed}")
    merged = json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True)
    log.info("effective config:\n%s", merged)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write(out / "config.json", merged + "\n")
        journal = Journal(out / "journal.jsonl")
    except OSError as exc:
        log.error("cannot write to %s: %s", out, exc)
        return EXIT_ENV
    try:
        gen, ev, clock = build_agents(cfg, journal)
        result, _ = run_search(None, cfg, gen, ev, journal=journal, clock=clock)
    finally:
        journal.close()

    doc = result.to_dict()
    try:
        _write(out / "result.json", json.dumps(json.loads(dumps(doc)), indent=2, sort_keys=True) + "\n")
        _write(out / "summary.txt", summary_text(doc))
        if args.plot:
            from .plotting import plot_search_trace

            plot_search_trace(journal.entries, out / "trace.png")
    except OSError as exc:
        log.error("cannot write results to %s: %s", out, exc)
        return EXIT_ENV
    print(summary_text(doc), end="")
    print(f"outputs in {out}")
    if result.stop_reason.startswith("backend unavailable"):
        log.error("run ended early: %s", result.stop_reason)
        return EXIT_ENV
    return EXIT_OK


# -- fit -------------------------------------------------------------------

def read_pairs_csv(path: str | Path, sentinel: float):
    """Parse `y,name:+1,name:-1,...` rows into a registry and aligned pairs."""
    from .scoring import LabeledPair, ProxyRegistry, ProxySpec, align

    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError("empty file")
    header, body = rows[0], rows[1:]
    if len(header) < 2 or header[0].strip().lower() != "y":
        raise ParseError("header must start with y followed by proxy columns")
    specs = []
    for col in header[1:]:
        name, sep, d = col.strip().rpartition(":")
        if not sep or not name or d.strip() not in ("+1", "1", "-1"):
            raise ParseError(f"column {col!r} needs a direction suffix, e.g. loss:-1")
        specs.append(ProxySpec(name=name, direction=int(d)))
    try:
        registry = ProxyRegistry(specs, sentinel=sentinel, max_proxies=max(len(specs), 1))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    if len(set(registry.names)) != len(specs):
        raise ParseError("duplicate proxy names")
    pairs = []
    for lineno, row in enumerate(body, 2):
        if len(row) != len(header):
            raise ParseError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
        pairs.append(LabeledPair(align(vals[1:], registry), vals[0]))
    return registry, pairs


def cmd_fit(args) -> int:
    from pydantic import ValidationError

    from .config import format_validation_error
    from .scoring import DEFAULT_SENTINEL, FitConfig, ScoringError, fit_calibration

    try:
        cfg = FitConfig(alpha=args.alpha, min_pairs_k=args.min_pairs, normalize=not args.raw)
    except ValidationError as exc:
        log.error("%s", format_validation_error(exc))
        return EXIT_CONFIG
    sentinel = DEFAULT_SENTINEL if args.sentinel is None else args.sentinel
    try:
        registry, pairs = read_pairs_csv(args.csv, sentinel)
        cal = fit_calibration(pairs, registry, cfg)
    except (ParseError, ScoringError) as exc:
        log.error("fit failed: %s: %s", type(exc).__name__, exc)
        return EXIT_CONFIG
    doc: dict[str, Any] = {"weights": [float(w) for w in cal.weights]}
    if args.verbose:
        doc["names"] = registry.names
        doc["ever_failed"] = [p.ever_failed for p in registry.proxies]
        doc["ridge_solution"] = [float(v) for v in cal.ridge_solution]
    print(json.dumps(doc))
    return EXIT_OK


# -- replay ----------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def cmd_replay(args) -> int:
    path = Path(args.journal)
    try:
        entries = read_journal(path)
    except CorruptJournal as exc:
        log.error("corrupt journal: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("cannot read %s: %s", path, exc)
        return EXIT_ENV
    result_path = Path(args.result) if args.result else path.with_name("result.json")
    result = None
    if result_path.exists():
        try:
            result = json.loads(result_path.read_text(encoding="utf-8"))
        except ValueError as exc:
            log.error("cannot parse %s: %s", result_path, exc)
            return EXIT_CONFIG

    state, problems = verify(entries, result)
    if not state.nodes:
        print("empty tree")
    else:
        print(f"{'node':>6} {'parent':>6} {'n':>6} {'q':>10} {'proxy':>10} {'true':>10}")
        for nid in sorted(state.nodes):
            nd = state.nodes[nid]
            print(f"{nid:>6} {_fmt(nd.parent):>6} {nd.n:>6} {_fmt(nd.q):>10} "
                  f"{_fmt(nd.aggregated_score):>10} {_fmt(nd.true_score):>10}")
        print(f"{len(state.nodes)} nodes, root {state.root}, {state.n_restarts} restarts, "
              f"{state.spent:g} units spent")
    if problems:
        for p in problems:
            print(f"MISMATCH {p}")
        return EXIT_MISMATCH
    if result is not None:
        print("replay verified against", result_path)
    return EXIT_OK


# -- experiment ------------------------------------------------------------

def cmd_experiment(args) -> int:
    from .experiment import (
        ExperimentConfig,
        budget_curve_experiment,
        drift_experiment,
        paired_sign_test,
        scores_by_seed,
        write_outputs,
    )

    over = dict(parse_override(item) for item in args.set or [])
    if args.seed is not None:
        over["first_seed"] = args.seed
    if args.workers is not None:
        over["workers"] = args.workers
    if args.out is not None:
        over["out"] = args.out
    base = drift_experiment().model_dump(mode="json") if args.preset == "drift" else None
    cfg = load_config(args.config, over, model=ExperimentConfig, base=base)
    log.info("effective config:\n%s", json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True))

    rows = budget_curve_experiment(cfg)
    out = Path(cfg.out or "runs/experiment")
    try:
        summary = write_outputs(rows, out, cfg)
    except OSError as exc:
        log.error("cannot write to %s: %s", out, exc)
        return EXIT_ENV
    for strategy, s in summary.items():
        cells = ", ".join(f"{b:g}: {m:.3f}±{d:.3f}" for b, m, d in zip(s["budget"], s["mean"], s["std"]))
        print(f"{strategy:<20} {cells}")
    lead = cfg.strategies[0]
    for other in cfg.strategies[1:]:
        for b in cfg.budgets:
            w, l, p = paired_sign_test(scores_by_seed(rows, lead, b), scores_by_seed(rows, other, b))
            print(f"{lead} vs {other} at {b:g}: {w} wins, {l} losses, one-sided p = {p:.3g}")
    print(f"outputs in {out}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=default, help="YAML or JSON config file")
    p.add_argument("--seed", type=int, default=default)
    p.add_argument("--out", default=default, help="output directory")
    p.add_argument("--workers", type=int, default=default)
    p.add_argument("--log-level", default=argparse.SUPPRESS if suppress else "INFO",
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    p.add_argument("--set", action="append", metavar="KEY=VALUE", default=default,
                   help="override a config field by dotted path, e.g. budget.total_units=60")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proxymcts", description=__doc__.split("\n")[0])
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("search", parents=[common], help="run one tree search")
    s.add_argument("--no-plot", dest="plot", action="store_false", help="skip trace.png")
    s.set_defaults(func=cmd_search)

    f = sub.add_parser("fit", parents=[common], help="fit proxy weights from labeled pairs")
    f.add_argument("csv", help="header: y,name:+1|-1,...; one labeled pair per row")
    f.add_argument("--alpha", type=float, default=1.0)
    f.add_argument("--sentinel", type=float, default=None)
    f.add_argument("--min-pairs", type=int, default=1)
    f.add_argument("--raw", action="store_true", help="skip column standardization")
    f.add_argument("-v", "--verbose", action="store_true")
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("replay", parents=[common], help="rebuild and verify a journal")
    r.add_argument("journal")
    r.add_argument("--result", help="defaults to result.json next to the journal")
    r.set_defaults(func=cmd_replay)

    e = sub.add_parser("experiment", parents=[common], help="simulated budget-curve experiment")
    e.add_argument("--preset", choices=["budget-curve", "drift"], default="budget-curve")
    e.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level), stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s", force=True,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("environment error: %s", exc)
        return EXIT_ENV


if __name__ == "__main__":
    sys.exit(main())
