"""Proxy-guided Monte Carlo tree search over candidate training scripts."""

from .config import ConfigError, RunConfig, load_config
from .orchestrator import Orchestrator, RunResult, TaskSpec, run_search
from .scoring import FitConfig, ProxyRegistry, ProxySpec, fit_weights, project_simplex
from .tree import SearchTree, TreeConfig

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "FitConfig",
    "Orchestrator",
    "ProxyRegistry",
    "ProxySpec",
    "RunConfig",
    "RunResult",
    "SearchTree",
    "TaskSpec",
    "TreeConfig",
    "fit_weights",
    "load_config",
    "project_simplex",
    "run_search",
]
