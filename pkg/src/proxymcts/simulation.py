"""Synthetic landscape and simulated agents for offline runs.

A candidate is a point on a regular grid in [0, 1]^dim. Its true score is a
clipped sum of Gaussian bumps; each proxy is a noisy, partly decorrelated
view of that score. Buggy points and proxy failures are drawn from streams
keyed by the landscape seed, so every run replays exactly.
"""

from __future__ import annotations

import json
import math
from functools import cached_property

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import qmc

from .agents import protocol
from .agents.base import (
    BuggyVerdict,
    CandidatePayload,
    FullEvalResult,
    GenerationContext,
    Mode,
    ProxyReport,
    SandboxLimits,
    content_hash,
)
from .scoring import ProxyRegistry

DIFFICULTY_FULL_COST = {"low": 1.0, "medium": 3.0, "high": 10.0}


class OutOfDomain(ValueError):
    pass


class ProxyModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    rho: float = Field(default=0.8, ge=-1, le=1)
    sigma: float = Field(default=0.1, ge=0)
    fail_prob: float = Field(default=0.0, ge=0, le=1)
    direction: int = -1


class DriftConfig(BaseModel):
    """Flip the correlation sign of one proxy for nodes created after a point."""

    model_config = ConfigDict(extra="forbid")

    proxy: str
    after_node: int = Field(ge=0)


def default_proxy_models() -> list[ProxyModel]:
    return [
        ProxyModel(name="one_epoch", rho=0.7, sigma=0.3),
        ProxyModel(name="noisy", rho=0.6, sigma=0.3),
        ProxyModel(name="dropout", rho=0.5, sigma=0.3, fail_prob=0.005),
    ]


class LandscapeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dim: int = Field(default=4, gt=0)
    levels: int = Field(default=6, ge=2)
    n_bumps: int = Field(default=5, gt=0)
    height_range: tuple[float, float] = (0.5, 1.0)
    width_range: tuple[float, float] = (0.12, 0.3)
    buggy_fraction: float = Field(default=0.3, ge=0, le=1)
    q_fix: float = Field(default=0.7, ge=0, le=1)
    proxies: list[ProxyModel] = Field(default_factory=default_proxy_models)
    drift: DriftConfig | None = None

    @model_validator(mode="after")
    def _check(self):
        lo, hi = self.height_range
        if not 0 < lo <= hi <= 1:
            raise ValueError("height_range must satisfy 0 < lo <= hi <= 1")
        if not 0 < self.width_range[0] <= self.width_range[1]:
            raise ValueError("width_range must be positive and ordered")
        if self.drift and self.drift.proxy not in {p.name for p in self.proxies}:
            raise ValueError(f"drift proxy {self.drift.proxy!r} is not a landscape proxy")
        return self


def drifting_landscape(after_node: int = 30, proxy: str = "one_epoch") -> LandscapeConfig:
    """Default landscape whose strongest proxy turns adversarial mid-run."""
    return LandscapeConfig(
        proxies=[
            ProxyModel(name="one_epoch", rho=0.9, sigma=0.2),
            ProxyModel(name="noisy", rho=0.6, sigma=0.3),
            ProxyModel(name="dropout", rho=0.6, sigma=0.3),
        ],
        drift=DriftConfig(proxy=proxy, after_node=after_node),
    )


def _stream(*key: int) -> np.random.Generator:
    return np.random.default_rng([int(k) & 0xFFFFFFFF for k in key])


class Landscape:
    def __init__(self, cfg: LandscapeConfig | None = None, seed: int = 0):
        self.cfg = cfg or LandscapeConfig()
        self.seed = seed
        c = self.cfg
        rng = _stream(seed, 0x1A4D)
        grid_idx = rng.choice(c.levels**c.dim, size=c.n_bumps, replace=False)
        self.centers = np.array([self.index_to_point(i) for i in grid_idx])
        self.heights = rng.uniform(*c.height_range, size=c.n_bumps)
        self.heights[0] = c.height_range[1]
        self.widths = rng.uniform(*c.width_range, size=c.n_bumps)
        self._models = {p.name: (i, p) for i, p in enumerate(c.proxies)}

    @property
    def dim(self) -> int:
        return self.cfg.dim

    @property
    def step(self) -> float:
        return 1.0 / (self.cfg.levels - 1)

    def snap(self, p) -> tuple[float, ...]:
        k = self.cfg.levels - 1
        return tuple(round(min(max(float(x), 0.0), 1.0) * k) / k for x in p)

    def index_to_point(self, idx: int) -> tuple[float, ...]:
        k = self.cfg.levels
        coords = []
        for _ in range(self.cfg.dim):
            idx, r = divmod(int(idx), k)
            coords.append(r / (k - 1))
        return tuple(coords)

    def point_to_index(self, p) -> int:
        k = self.cfg.levels
        idx = 0
        for x in reversed(p):
            idx = idx * k + int(round(x * (k - 1)))
        return idx

    def _check(self, p) -> np.ndarray:
        arr = np.asarray(p, dtype=float)
        if arr.shape != (self.dim,) or np.any(arr < 0) or np.any(arr > 1):
            raise OutOfDomain(f"{p!r} is not in [0,1]^{self.dim}")
        return arr

    def true_score(self, p) -> float:
        x = self._check(p)
        d2 = ((self.centers - x) ** 2).sum(axis=1)
        total = float((self.heights * np.exp(-d2 / (2 * self.widths**2))).sum())
        return min(1.0, total)

    @cached_property
    def points(self) -> list[tuple[float, ...]]:
        """Every grid point, in index order."""
        return [self.index_to_point(i) for i in range(self.cfg.levels**self.dim)]

    @cached_property
    def grid_scores(self) -> np.ndarray:
        pts = np.array(self.points)
        d2 = ((pts[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
        return np.minimum(1.0, (self.heights * np.exp(-d2 / (2 * self.widths**2))).sum(axis=1))

    @property
    def optimum(self) -> float:
        return float(self.grid_scores.max())

    def is_buggy(self, p) -> bool:
        idx = self.point_to_index(p)
        return bool(_stream(self.seed, idx, 0xB06).random() < self.cfg.buggy_fraction)

    def proxy_names(self) -> list[str]:
        return [p.name for p in self.cfg.proxies]

    def proxy_score(self, p, i: int, node_id: int, sentinel: float = 1e9) -> float:
        """Raw proxy reading for point p, keyed by (seed, node, proxy index).

        Loss-type proxies (direction -1) report 1 - signal so lower is better.
        """
        model = self.cfg.proxies[i]
        y = self.true_score(p)
        rng = _stream(self.seed, node_id, i, 0x9A0)
        if rng.random() < model.fail_prob:
            return sentinel
        rho = model.rho
        drift = self.cfg.drift
        if drift is not None and drift.proxy == model.name and node_id >= drift.after_node:
            rho = -rho
        signal = rho * math.sqrt(y) + (1 - abs(rho)) * rng.normal(0.0, model.sigma)
        return 1.0 - signal if model.direction == -1 else signal


def encode_script(point, buggy: bool, revision: int | None = None) -> str:
    lines = [
        "# simulated candidate",
        f"POINT = {json.dumps([float(x) for x in point])}",
        f"BUGGY = {bool(buggy)}",
    ]
    if revision is not None:
        lines.append(f"# revision {revision}")
    return "\n".join(lines) + "\n"


class SimulatedGenerator:
    """Deterministic stand-in for the code-writing agent.

    Draft walks a scrambled Halton sequence snapped to the grid, Improve moves
    one coordinate by one grid step, Debug clears the bug flag with
    probability ``q_fix``.
    """

    def __init__(self, landscape: Landscape, seed: int = 0):
        self.land = landscape
        self.seed = seed
        self._halton = qmc.Halton(d=landscape.dim, scramble=True, seed=seed)
        self._drafted: set[tuple[float, ...]] = set()
        self._hashes: dict[tuple[float, ...], str] = {}
        self._draft_count = 0
        self._calls = 0

    def _next_draft_point(self, avoid: set[str]) -> tuple[float, ...]:
        total = self.land.cfg.levels**self.land.dim
        self._draft_count += 1
        p = self.land.snap(self._halton.random(1)[0])
        start = self.land.point_to_index(p)
        # a taken cell defers to the next free one in index order
        if len(self._drafted) < total:
            for k in range(total):
                q = self.land.points[(start + k) % total]
                if q not in self._drafted and self._payload_hash(q) not in avoid:
                    self._drafted.add(q)
                    return q
        # grid exhausted: repeats are fine, sibling copies only as a last resort
        for k in range(total):
            q = self.land.points[(start + k) % total]
            if self._payload_hash(q) not in avoid:
                return q
        return p

    def _payload_hash(self, p) -> str:
        h = self._hashes.get(p)
        if h is None:
            h = self._hashes[p] = content_hash(encode_script(p, self.land.is_buggy(p)))
        return h

    def generate(self, ctx: GenerationContext) -> CandidatePayload:
        self._calls += 1
        if ctx.mode is Mode.DRAFT:
            p = self._next_draft_point(set(ctx.sibling_hashes))
            bug = self.land.is_buggy(p)
            return CandidatePayload(
                plan=f"Draft design #{self._draft_count} at {list(p)}.",
                script=encode_script(p, bug),
                mode=Mode.DRAFT,
                meta={"point": list(p), "buggy": bug},
            )
        parent = tuple(ctx.parent_meta["point"])
        rng = _stream(self.seed, self._calls, 0x6E4)
        if ctx.mode is Mode.IMPROVE:
            j = int(rng.integers(self.land.dim))
            sign = 1 if rng.random() < 0.5 else -1
            p = list(parent)
            moved = p[j] + sign * self.land.step
            if moved < -1e-12 or moved > 1 + 1e-12:
                moved = p[j] - sign * self.land.step
            p[j] = moved
            p = self.land.snap(p)
            bug = self.land.is_buggy(p)
            return CandidatePayload(
                plan=f"Change coordinate {j} from {parent[j]:g} to {p[j]:g}.",
                script=encode_script(p, bug),
                mode=Mode.IMPROVE,
                parent_hash=ctx.parent_hash,
                meta={"point": list(p), "buggy": bug, "changed": j},
            )
        fixed = rng.random() < self.land.cfg.q_fix
        bug = bool(ctx.parent_meta.get("buggy", True)) and not fixed
        return CandidatePayload(
            plan="Apply a minimal fix for the reported failure.",
            script=encode_script(parent, bug, revision=self._calls),
            mode=Mode.DEBUG,
            parent_hash=ctx.parent_hash,
            meta={"point": list(parent), "buggy": bug},
        )


class SimulatedEvaluator:
    """Evaluation agent backed by the landscape's closed forms."""

    def __init__(self, landscape: Landscape):
        self.land = landscape

    def probe(self, payload: CandidatePayload, limits: SandboxLimits) -> BuggyVerdict | None:
        return None

    def run_proxy(
        self,
        payload: CandidatePayload,
        registry: ProxyRegistry,
        limits: SandboxLimits,
        *,
        node_id: int | None = None,
    ) -> ProxyReport | BuggyVerdict:
        if payload.meta.get("buggy"):
            return BuggyVerdict("Traceback (most recent call last):\nRuntimeError: simulated crash", 1, 0.0)
        p = payload.meta["point"]
        nid = -1 if node_id is None else node_id
        scores = {}
        for name in registry.names:
            if name in self.land._models:
                i = self.land._models[name][0]
                scores[name] = self.land.proxy_score(p, i, nid, registry.sentinel)
            else:
                scores[name] = registry.sentinel
        line = protocol.format_proxy_line(scores)
        return ProxyReport(protocol.parse_proxy_line(line, registry.names), line, 0.0)

    def run_full(
        self, payload: CandidatePayload, limits: SandboxLimits, *, node_id: int | None = None
    ) -> FullEvalResult:
        if payload.meta.get("buggy"):
            return FullEvalResult(None, False, "RuntimeError: simulated crash", 0.0, 1)
        y = self.land.true_score(payload.meta["point"])
        return FullEvalResult(y, True, protocol.format_final_line(y), 0.0, 0)
