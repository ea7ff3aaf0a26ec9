from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Protocol

from ..scoring import ProxyRegistry, ProxySpec


class Mode(str, Enum):
    DRAFT = "Draft"
    IMPROVE = "Improve"
    DEBUG = "Debug"


class AgentError(Exception):
    pass


class BackendUnavailable(AgentError):
    pass


class MalformedResponse(AgentError):
    pass


class SandboxFailure(AgentError):
    pass


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass
class CandidatePayload:
    plan: str
    script: str
    mode: Mode
    parent_hash: str | None = None
    # backend-specific extras (the simulator keeps its point here)
    meta: dict[str, Any] = field(default_factory=dict)
    _hash: tuple[str, str] | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.script:
            raise ValueError("script must be non-empty")
        if self.mode is not Mode.DRAFT and self.parent_hash is None:
            raise ValueError(f"{self.mode.value} payload needs parent_hash")

    @property
    def hash(self) -> str:
        # payloads are treated as immutable once built
        if self._hash is None or self._hash[0] is not self.script:
            self._hash = (self.script, content_hash(self.script))
        return self._hash[1]

    def to_dict(self) -> dict:
        return {
            "plan": self.plan,
            "code_hash": self.hash,
            "mode": self.mode.value,
            "parent_hash": self.parent_hash,
            "meta": self.meta,
        }


@dataclass
class SiblingSummary:
    node: int
    plan: str
    score: float | None

    def line(self) -> str:
        first = self.plan.strip().split(". ")[0][:120]
        score = "n/a" if self.score is None else f"{self.score:.4g}"
        return f"[{self.node}] {first} (score {score})"


@dataclass
class GenerationContext:
    mode: Mode
    task_description: str = ""
    data_signature: dict[str, Any] = field(default_factory=dict)
    environment: str = ""
    remaining_budget: float = 0.0
    parent_plan: str | None = None
    parent_script: str | None = None
    parent_hash: str | None = None
    parent_meta: dict[str, Any] = field(default_factory=dict)
    execution_result: str | None = None
    siblings: list[SiblingSummary] = field(default_factory=list)
    sibling_hashes: list[str] = field(default_factory=list)
    memory: list[SiblingSummary] = field(default_factory=list)
    summary_cap: int = 4000

    def memory_block(self) -> str:
        """Sibling and long-term memory lines, truncated to the summary cap."""
        lines = []
        if self.siblings:
            lines.append("Sibling attempts:")
            lines.extend(s.line() for s in self.siblings)
        if self.memory:
            lines.append("Best historical nodes:")
            lines.extend(s.line() for s in self.memory)
        text = "\n".join(lines)
        return text[: self.summary_cap]


@dataclass
class SandboxLimits:
    wall: float = 600.0
    max_stdout_bytes: int = 1_000_000
    workdir_quota_bytes: int = 512 * 1024 * 1024
    probe_timeout: float = 60.0


@dataclass
class ProxyReport:
    scores: dict[str, float]
    raw_stdout_line: str
    wall_time: float


@dataclass
class BuggyVerdict:
    stderr: str
    exit_status: int | None
    wall_time: float
    timed_out: bool = False


@dataclass
class MalformedReport:
    """Run finished but the proxy line was missing or unusable."""

    reason: str
    stdout_tail: str
    wall_time: float


@dataclass
class FullEvalResult:
    true_score: float | None
    artifact_present: bool
    logs: str
    wall_time: float
    exit_status: int

    def __post_init__(self):
        if self.true_score is not None and not self.artifact_present:
            raise ValueError("true_score requires an artifact")


class GenerationAgent(Protocol):
    def generate(self, ctx: GenerationContext) -> CandidatePayload: ...


class EvaluationAgent(Protocol):
    def run_proxy(
        self,
        payload: CandidatePayload,
        registry: ProxyRegistry,
        limits: SandboxLimits,
        *,
        node_id: int | None = None,
    ) -> ProxyReport | BuggyVerdict | MalformedReport: ...

    def run_full(
        self, payload: CandidatePayload, limits: SandboxLimits, *, node_id: int | None = None
    ) -> FullEvalResult: ...


def builtin_proxies() -> list[ProxySpec]:
    """The three starting proxies: all validation losses, uniform prior."""
    return [
        ProxySpec("one_epoch", direction=-1, weight=1 / 3),
        ProxySpec("noisy", direction=-1, weight=1 / 3),
        ProxySpec("dropout", direction=-1, weight=1 / 3),
    ]
