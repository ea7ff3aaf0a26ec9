"""Proxy aggregation and adaptive weight fitting.

Raw proxy outputs are aligned to a larger-is-better convention with a per-proxy
direction coefficient, optionally z-scored with statistics taken from the
labeled pairs, and combined by a normalized weighted sum. Weights are refit
by ridge regression against ground-truth scores and projected back onto the
probability simplex; proxies that ever emitted the sentinel are pinned to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

DEFAULT_SENTINEL = 1e9
STD_FLOOR = 1e-8


class ScoringError(Exception):
    pass


class DimensionMismatch(ScoringError, ValueError):
    pass


class ZeroWeightSum(ScoringError):
    pass


class InsufficientPairs(ScoringError):
    pass


class AllProxiesFailed(ScoringError):
    pass


class DuplicateName(ScoringError, ValueError):
    pass


class EmptyVector(ScoringError, ValueError):
    pass


@dataclass
class ProxySpec:
    name: str
    direction: int = -1
    weight: float = 0.0
    ever_failed: bool = False
    # affine map applied to the aligned value before weighting
    center: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise ValueError(f"direction must be +1 or -1, got {self.direction}")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight must lie in [0, 1], got {self.weight}")


@dataclass
class ProxyRegistry:
    proxies: list[ProxySpec] = field(default_factory=list)
    sentinel: float = DEFAULT_SENTINEL
    max_proxies: int = 8

    def __len__(self) -> int:
        return len(self.proxies)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.proxies]

    @property
    def weights(self) -> np.ndarray:
        return np.array([p.weight for p in self.proxies], dtype=float)

    def set_weights(self, weights: Sequence[float]) -> None:
        if len(weights) != len(self.proxies):
            raise DimensionMismatch(f"{len(weights)} weights for {len(self.proxies)} proxies")
        for p, w in zip(self.proxies, weights):
            p.weight = float(w)

    def is_sentinel(self, value: float) -> bool:
        return value >= self.sentinel

    def uniform_fallback(self) -> None:
        """Spread weight evenly over proxies that never failed."""
        alive = [p for p in self.proxies if not p.ever_failed]
        for p in self.proxies:
            p.weight = 1.0 / len(alive) if p in alive else 0.0

    def to_dict(self) -> dict:
        return {
            "sentinel": self.sentinel,
            "max_proxies": self.max_proxies,
            "proxies": [vars(p).copy() for p in self.proxies],
        }

    @classmethod
    def from_dict(cls, d: dict) -> ProxyRegistry:
        return cls(
            proxies=[ProxySpec(**p) for p in d["proxies"]],
            sentinel=d["sentinel"],
            max_proxies=d["max_proxies"],
        )


@dataclass
class LabeledPair:
    x_aligned: list[float]
    y_aligned: float


class FitConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha: float = Field(default=1.0, gt=0)
    min_pairs_k: int = Field(default=5, ge=1)
    epsilon: float = Field(default=0.1, gt=0)
    normalize: bool = True


@dataclass
class Calibration:
    weights: np.ndarray
    ridge_solution: np.ndarray
    columns: list[int]
    center: np.ndarray
    scale: np.ndarray


def align(x_raw: Sequence[float | None], registry: ProxyRegistry) -> list[float | None]:
    """Apply direction coefficients; sentinels pass through and flag the proxy."""
    if len(x_raw) != len(registry):
        raise DimensionMismatch(f"{len(x_raw)} values for {len(registry)} proxies")
    out: list[float | None] = []
    for x, spec in zip(x_raw, registry.proxies):
        if x is None:
            out.append(None)
        elif registry.is_sentinel(x):
            spec.ever_failed = True
            out.append(x)
        else:
            out.append(spec.direction * x)
    return out


def aggregate(x: Sequence[float | None], registry: ProxyRegistry) -> float | None:
    """Normalized weighted sum of aligned proxy values.

    Returns None when the vector cannot be ranked this round: a missing
    component, or a sentinel in a positively weighted slot.
    """
    if len(x) != len(registry):
        raise DimensionMismatch(f"{len(x)} values for {len(registry)} proxies")
    if any(v is None for v in x):
        return None
    num = 0.0
    den = 0.0
    for v, spec in zip(x, registry.proxies):
        if spec.weight <= 0.0:
            continue
        if registry.is_sentinel(v):
            return None
        z = (spec.direction * v - spec.center) / spec.scale
        num += spec.weight * z
        den += spec.weight
    if den == 0.0:
        raise ZeroWeightSum()
    return num / den


def ridge_solve(Z: np.ndarray, Y: np.ndarray, alpha: float) -> np.ndarray:
    """argmin ||Z l - Y||^2 + alpha ||l||^2 via the normal equations."""
    Z = np.asarray(Z, dtype=float)
    Y = np.asarray(Y, dtype=float)
    m = Z.shape[1]
    return np.linalg.solve(Z.T @ Z + alpha * np.eye(m), Z.T @ Y)


def project_simplex(v: Sequence[float]) -> np.ndarray:
    """Euclidean projection onto {l >= 0, sum(l) = 1} by sort-and-threshold."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise EmptyVector()
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.count_nonzero(u - cssv / ind > 0)
    theta = cssv[rho - 1] / rho
    w = np.maximum(v - theta, 0.0)
    # absorb rounding so the sum is 1 to machine precision
    support = w > 0
    w[support] += (1.0 - w.sum()) / support.sum()
    return np.maximum(w, 0.0)


def column_stats(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    center = Z.mean(axis=0)
    scale = np.maximum(Z.std(axis=0), STD_FLOOR)
    return center, scale


def fit_calibration(
    pairs: Sequence[LabeledPair], registry: ProxyRegistry, cfg: FitConfig
) -> Calibration:
    if len(registry) == 0:
        raise AllProxiesFailed("registry is empty")
    if len(pairs) < cfg.min_pairs_k:
        raise InsufficientPairs(f"{len(pairs)} pairs, need {cfg.min_pairs_k}")
    m = len(registry)
    for p in pairs:
        if len(p.x_aligned) != m:
            raise DimensionMismatch(f"pair has {len(p.x_aligned)} columns, registry {m}")
    cols = [i for i, spec in enumerate(registry.proxies) if not spec.ever_failed]
    if not cols:
        raise AllProxiesFailed()
    Z = np.array([[p.x_aligned[i] for i in cols] for p in pairs], dtype=float)
    Y = np.array([p.y_aligned for p in pairs], dtype=float)
    if cfg.normalize:
        center, scale = column_stats(Z)
    else:
        center, scale = np.zeros(len(cols)), np.ones(len(cols))
    lam_hat = ridge_solve((Z - center) / scale, Y, cfg.alpha)
    lam = project_simplex(lam_hat)

    weights = np.zeros(m)
    weights[cols] = lam
    full_center = np.zeros(m)
    full_scale = np.ones(m)
    full_center[cols] = center
    full_scale[cols] = scale
    return Calibration(weights, lam_hat, cols, full_center, full_scale)


def fit_weights(
    pairs: Sequence[LabeledPair], registry: ProxyRegistry, cfg: FitConfig
) -> np.ndarray:
    return fit_calibration(pairs, registry, cfg).weights


def apply_calibration(registry: ProxyRegistry, cal: Calibration) -> None:
    registry.set_weights(cal.weights)
    for spec, c, s in zip(registry.proxies, cal.center, cal.scale):
        spec.center = float(c)
        spec.scale = float(s)


def drift_exceeded(old: Sequence[float], new: Sequence[float], epsilon: float) -> bool:
    old = np.asarray(old, dtype=float)
    new = np.asarray(new, dtype=float)
    if old.shape != new.shape:
        raise DimensionMismatch(f"{old.shape} vs {new.shape}")
    return float(np.abs(new - old).sum()) > epsilon


def register_proxy(registry: ProxyRegistry, spec: ProxySpec) -> ProxyRegistry:
    """Append a proxy at zero weight, evicting the lightest one if over budget.

    Among equally light proxies the oldest goes first, so a fresh proxy is not
    evicted by its own registration.
    """
    if spec.name in registry.names:
        raise DuplicateName(spec.name)
    spec.weight = 0.0
    registry.proxies.append(spec)
    while len(registry) > registry.max_proxies:
        idx = min(range(len(registry)), key=lambda i: (registry.proxies[i].weight, i))
        dropped = registry.proxies.pop(idx)
        total = registry.weights.sum()
        if dropped.weight > 0 and total > 0:
            registry.set_weights(registry.weights / total)
    return registry


def remap_pairs(
    pairs: Sequence[LabeledPair], old_names: Sequence[str], new_names: Sequence[str]
) -> list[LabeledPair]:
    """Re-index stored pairs after the registry changed.

    New columns are zero-padded; columns of removed proxies are dropped.
    """
    index = {name: i for i, name in enumerate(old_names)}
    out = []
    for p in pairs:
        x = [p.x_aligned[index[n]] if n in index else 0.0 for n in new_names]
        out.append(LabeledPair(x, p.y_aligned))
    return out
