"""Run configuration: one nested, validated document loaded from YAML or JSON."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .scoring import DEFAULT_SENTINEL, FitConfig
from .simulation import LandscapeConfig
from .tree import TreeConfig


class ConfigError(Exception):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BudgetConfig(_Strict):
    total_units: float = Field(default=30.0, ge=0)
    proxy_cost: float = Field(default=0.1, gt=0)
    full_cost: float = Field(default=1.0, gt=0)
    # None means no wall-clock deadline
    wallclock_seconds: float | None = Field(default=None, gt=0)
    # simulated seconds charged per cost unit (simulated backend only)
    seconds_per_unit: float = Field(default=3600.0, gt=0)
    low_budget_fraction: float = Field(default=0.15, ge=0, le=1)
    # None: 0.2 of the wall-clock allowance
    low_time_threshold: float | None = Field(default=None, ge=0)
    buggy_threshold: int = Field(default=5, ge=0)
    ratio_bound: float = Field(default=10.0, gt=0)
    score_floor: float = Field(default=1.0, gt=0)
    proxy_mode: bool = True
    # proxy-scored nodes required before the first escalation to full training
    escalate_after: int = Field(default=8, ge=0)
    # also escalate the best of every this many proxy-scored nodes; None disables
    harvest_every: int | None = Field(default=12, gt=0)

    @model_validator(mode="after")
    def _costs(self):
        if self.proxy_cost >= self.full_cost:
            raise ValueError("proxy_cost must be below full_cost")
        return self


class SearchConfig(_Strict):
    restarts: bool = True
    max_iterations: int = Field(default=100_000, gt=0)
    context_chars: int = Field(default=4000, gt=0)
    restart_context_factor: float = Field(default=0.5, gt=0, le=1)
    memory_top: int = Field(default=3, ge=0)
    # most recent siblings summarized in a prompt; hashes always cover all
    sibling_summaries: int = Field(default=32, ge=0)


class RegistryConfig(_Strict):
    sentinel: float = DEFAULT_SENTINEL
    max_proxies: int = Field(default=8, gt=0)
    # None selects the three built-in proxies
    proxies: list[dict[str, Any]] | None = None


class LLMConfig(_Strict):
    base_url: str = "http://localhost:8000/v1"
    model: str = "gpt-4.1"
    temperature: float = Field(default=0.7, ge=0)
    token_env: str = "PROXYMCTS_API_KEY"
    timeout: float = Field(default=120.0, gt=0)
    retries: int = Field(default=3, ge=1)


class SandboxConfig(_Strict):
    wall: float = Field(default=600.0, gt=0)
    probe_timeout: float = Field(default=60.0, gt=0)
    max_stdout_bytes: int = Field(default=1_000_000, gt=0)
    workdir_quota_bytes: int = Field(default=512 * 1024 * 1024, gt=0)
    artifact_name: str = "submission.csv"
    noise_frac: float = Field(default=0.1, ge=0)
    mask_frac: float = Field(default=0.2, ge=0, le=1)


class AgentConfig(_Strict):
    backend: Literal["simulated", "llm"] = "simulated"
    llm: LLMConfig = Field(default_factory=LLMConfig)
    sandbox: SandboxConfig = Field(default_factory=SandboxConfig)


class TaskConfig(_Strict):
    description: str = "Maximize the validation metric of a tabular model."
    data_signature: dict[str, Any] = Field(default_factory=dict)
    environment: str = "python3, numpy"
    maximize: bool = True


class RunConfig(_Strict):
    seed: int = 0
    out: str | None = None
    workers: int = Field(default=1, ge=1)
    tree: TreeConfig = Field(default_factory=TreeConfig)
    fit: FitConfig = Field(default_factory=FitConfig)
    budget: BudgetConfig = Field(default_factory=BudgetConfig)
    search: SearchConfig = Field(default_factory=SearchConfig)
    registry: RegistryConfig = Field(default_factory=RegistryConfig)
    agents: AgentConfig = Field(default_factory=AgentConfig)
    task: TaskConfig = Field(default_factory=TaskConfig)
    landscape: LandscapeConfig = Field(default_factory=LandscapeConfig)


def format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "\n".join(lines)


def read_mapping(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (ValueError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def set_path(data: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    cur = data
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
        if not isinstance(cur, dict):
            raise ConfigError(f"{dotted}: {k} is not a section")
    cur[keys[-1]] = value


def parse_override(item: str) -> tuple[str, Any]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key.path=value")
    key, raw = item.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    return key.strip(), value


def deep_merge(base: dict, top: dict) -> dict:
    out = dict(base)
    for k, v in top.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(
    path: str | Path | None = None,
    overrides: dict[str, Any] | None = None,
    model=RunConfig,
    base: dict | None = None,
):
    """Validate `base` <- file <- dotted overrides, later layers winning."""
    data = deep_merge(base or {}, read_mapping(path) if path else {})
    for k, v in (overrides or {}).items():
        set_path(data, k, v)
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(format_validation_error(exc)) from exc
