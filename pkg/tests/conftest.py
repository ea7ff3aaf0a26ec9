import pytest

from proxymcts.config import RunConfig
from proxymcts.orchestrator import Orchestrator
from proxymcts.simulation import Landscape, LandscapeConfig, SimulatedEvaluator, SimulatedGenerator


def make_orchestrator(budget=30.0, seed=0, landscape_seed=None, **sections):
    """Orchestrator on the simulated backend; `sections` patch config sections."""
    cfg = RunConfig(seed=seed)
    cfg.budget.total_units = budget
    for section, values in sections.items():
        for k, v in values.items():
            setattr(getattr(cfg, section), k, v)
    land = Landscape(cfg.landscape, seed if landscape_seed is None else landscape_seed)
    return Orchestrator(cfg, SimulatedGenerator(land, seed=seed), SimulatedEvaluator(land)), land


@pytest.fixture
def landscape():
    return Landscape(LandscapeConfig(), seed=42)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
