from __future__ import annotations

import os
import sys
import time

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def desk_grid():
    """The n=100, p=100, reps=30 contamination grid shared by several tests."""
    from cauchypca.simulation import SimScenario, run_grid, scenario_grid

    base = SimScenario(n=100, p=100, reps=30, seed=2024)
    cells = run_grid(scenario_grid(base, [None, 3, 4, 5, 6, 7, 8], [0, 30, 60, 90]))
    return {(s.scenario.phi_degrees, s.scenario.kappa): s for s in cells}


@pytest.fixture(scope="session")
def large_sample_cell():
    """The n=500 counterpart of the desk grid's (phi=0, kappa=8) cell."""
    from cauchypca.simulation import SimScenario, run_scenario

    return run_scenario(SimScenario(n=500, p=100, kappa=8, phi_degrees=0.0, reps=30, seed=2024))


_ACCEPTANCE: list[str] = []
_SESSION_START = time.perf_counter()
SUITE_BUDGET_S = 300.0


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion for the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    elapsed = time.perf_counter() - _SESSION_START
    failed = len(terminalreporter.stats.get("failed", [])) + len(terminalreporter.stats.get("error", []))
    ok = failed == 0 and elapsed < SUITE_BUDGET_S
    lines = sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":")))
    lines.append(
        f"criterion 8: {'PASS' if ok else 'FAIL'}  {failed} failing tests, session {elapsed:.0f} s"
        f" (budget {SUITE_BUDGET_S:.0f} s)"
    )
    terminalreporter.section("acceptance")
    for line in lines:
        terminalreporter.write_line(line)
