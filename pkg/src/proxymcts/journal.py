"""Append-only JSON Lines journal and post-hoc replay."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable


class Event(str, Enum):
    CREATED = "Created"
    PROXY_EVALUATED = "ProxyEvaluated"
    FULL_EVALUATED = "FullEvaluated"
    REWARDED = "Rewarded"
    MARKED_TERMINAL = "MarkedTerminal"
    RESTART = "Restart"
    WEIGHTS_REFIT = "WeightsRefit"
    PROXY_MODE_TOGGLED = "ProxyModeToggled"
    BUDGET_CHARGED = "BudgetCharged"
    AGENT_EXCHANGE = "AgentExchange"


class CorruptJournal(Exception):
    pass


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, Enum):
        return obj.value
    if hasattr(obj, "tolist"):
        return _clean(obj.tolist())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), allow_nan=False)


class Journal:
    """Ordered event log; optionally mirrored line-by-line to a file."""

    def __init__(self, path: str | Path | None = None, clock: Callable[[], float] | None = None):
        self.entries: list[dict] = []
        self.path = Path(path) if path else None
        self.clock = clock
        self._fh = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "w", encoding="utf-8")

    def append(self, node: int | None, event: Event, **detail: Any) -> dict:
        entry = {
            "seq": len(self.entries),
            "ts": self.clock() if self.clock is not None else 0.0,
            "node": node,
            "event": event.value,
            "detail": _clean(detail),
        }
        self.entries.append(entry)
        if self._fh is not None:
            self._fh.write(dumps(entry) + "\n")
            self._fh.flush()
        return entry

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __len__(self) -> int:
        return len(self.entries)


def read_journal(path: str | Path) -> list[dict]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except ValueError as exc:
                raise CorruptJournal(f"line {lineno}: {exc}") from exc
            if not isinstance(entry, dict) or not {"seq", "ts", "node", "event", "detail"} <= set(entry):
                raise CorruptJournal(f"line {lineno}: missing fields")
            entries.append(entry)
    return entries


@dataclass
class ReplayNode:
    parent: int | None
    q: float = 0.0
    n: int = 0
    aggregated_score: float | None = None
    true_score: float | None = None


@dataclass
class ReplayState:
    nodes: dict[int, ReplayNode] = field(default_factory=dict)
    root: int | None = None
    spent: float = 0.0
    n_restarts: int = 0
    n_proxy_evals: int = 0
    n_full_evals: int = 0
    problems: list[str] = field(default_factory=list)


def replay(entries: list[dict]) -> ReplayState:
    """Rebuild final tree statistics from journal events."""
    st = ReplayState()
    for i, e in enumerate(entries):
        if e["seq"] != i:
            st.problems.append(f"sequence gap: expected seq {i}, found {e['seq']}")
            break
    for e in entries:
        ev, v, d = e["event"], e["node"], e["detail"]
        if ev == Event.CREATED.value:
            st.nodes[v] = ReplayNode(parent=d.get("parent"))
            if d.get("parent") is None:
                st.root = v
        elif ev == Event.REWARDED.value:
            cur = v
            while cur is not None:
                if cur not in st.nodes:
                    st.problems.append(f"reward path reaches unknown node {cur}")
                    break
                node = st.nodes[cur]
                node.q += d["reward"]
                node.n += 1
                cur = node.parent
        elif ev == Event.PROXY_EVALUATED.value:
            st.n_proxy_evals += 1
            if v in st.nodes:
                st.nodes[v].aggregated_score = d.get("aggregated_score")
        elif ev == Event.FULL_EVALUATED.value:
            st.n_full_evals += 1
            if v in st.nodes:
                st.nodes[v].true_score = d.get("true_score")
        elif ev == Event.BUDGET_CHARGED.value:
            st.spent += d["cost"]
        elif ev == Event.RESTART.value:
            st.n_restarts += 1
            new_root = d["new_root"]
            for pid in d["pruned"]:
                st.nodes.pop(pid, None)
            for rid, score in d.get("scores", {}).items():
                if int(rid) in st.nodes:
                    st.nodes[int(rid)].aggregated_score = score
            for rid in d["retained"]:
                node = st.nodes.get(rid)
                if node is None:
                    st.problems.append(f"restart retains unknown node {rid}")
                    continue
                node.parent = new_root
                node.q, node.n = 0.0, 0
            st.root = new_root
    return st


def _close(a, b, rel=1e-9) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return math.isclose(a, b, rel_tol=rel, abs_tol=1e-12)


def verify(entries: list[dict], result: dict | None) -> tuple[ReplayState, list[str]]:
    """Compare a replay with the recorded run result; returns (state, mismatches)."""
    st = replay(entries)
    problems = list(st.problems)
    if result is None:
        if entries:
            problems.append("journal has entries but no run result to verify against")
        return st, problems
    if result.get("n_journal_entries") != len(entries):
        problems.append(
            f"entry count {len(entries)} != recorded {result.get('n_journal_entries')}"
        )
    recorded = {int(k): v for k, v in result.get("final_tree", {}).items()}
    if set(recorded) != set(st.nodes):
        problems.append(
            f"node sets differ: replay {sorted(st.nodes)} vs recorded {sorted(recorded)}"
        )
    for nid, rec in recorded.items():
        node = st.nodes.get(nid)
        if node is None:
            continue
        if node.n != rec["n"]:
            problems.append(f"node {nid}: n {node.n} != {rec['n']}")
        if not _close(node.q, rec["q"]):
            problems.append(f"node {nid}: q {node.q} != {rec['q']}")
        if not _close(node.aggregated_score, rec.get("aggregated_score")):
            problems.append(f"node {nid}: aggregated score differs")
        if not _close(node.true_score, rec.get("true_score")):
            problems.append(f"node {nid}: true score differs")
    budget = result.get("budget", {})
    if "spent" in budget and not _close(st.spent, budget["spent"]):
        problems.append(f"budget spent {st.spent} != {budget['spent']}")
    for key in ("n_restarts", "n_proxy_evals", "n_full_evals"):
        if result.get(key, getattr(st, key)) != getattr(st, key):
            problems.append(f"{key} {getattr(st, key)} != recorded {result[key]}")
    return st, problems
