"""Stdout line protocol shared by candidate scripts and the evaluator.

Proxy runs end with ``{"proxy_scores": {...}}`` and full runs with
``{"final_score": x}``; the last matching line wins.
"""

from __future__ import annotations

import json
import math

PROXY_KEY = "proxy_scores"
FINAL_KEY = "final_score"


def format_proxy_line(scores: dict[str, float]) -> str:
    # repr-based float encoding in json round-trips doubles exactly
    return json.dumps({PROXY_KEY: {k: float(v) for k, v in scores.items()}})


def format_final_line(score: float) -> str:
    return json.dumps({FINAL_KEY: float(score)})


def _last_object_with(stdout: str, key: str) -> dict | None:
    for line in reversed(stdout.splitlines()):
        line = line.strip()
        if not (line.startswith("{") and key in line):
            continue
        try:
            obj = json.loads(line)
        except ValueError:
            continue
        if isinstance(obj, dict) and key in obj:
            return obj
    return None


def find_proxy_line(stdout: str) -> str | None:
    for line in reversed(stdout.splitlines()):
        if line.strip().startswith("{") and PROXY_KEY in line:
            return line.strip()
    return None


def parse_proxy_line(line: str, names: list[str] | None = None) -> dict[str, float]:
    """Decode a proxy line; raises ValueError when malformed or incomplete."""
    obj = json.loads(line)
    if not isinstance(obj, dict) or not isinstance(obj.get(PROXY_KEY), dict):
        raise ValueError(f"no {PROXY_KEY!r} object")
    scores = {}
    for k, v in obj[PROXY_KEY].items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueError(f"non-numeric score for {k!r}")
        scores[k] = float(v)
    if names is not None:
        missing = [n for n in names if n not in scores]
        if missing:
            raise ValueError(f"missing proxies {missing}")
    return scores


def parse_final_score(stdout: str) -> float | None:
    obj = _last_object_with(stdout, FINAL_KEY)
    if obj is None:
        return None
    v = obj[FINAL_KEY]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        return None
    return float(v)
