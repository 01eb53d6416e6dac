import functools
import time

import pytest

from coopsense.harness import ScenarioSpec, resolve_scenario, run_scenario


@functools.lru_cache(maxsize=None)
def cached_run(name: str, mode: str, fusion: str = "feature", seed: int | None = None):
    """Run a shipped scenario once per session; returns (report, seconds)."""
    spec = ScenarioSpec(resolve_scenario(name), mode=mode, fusion_mode=fusion, seed=seed)
    start = time.perf_counter()
    report = run_scenario(spec)
    return report, time.perf_counter() - start


@pytest.fixture(scope="session")
def scenario_run():
    return cached_run


ACCEPTANCE_RESULTS: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def acceptance():
    """Record one acceptance criterion outcome and assert it."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE_RESULTS[number] = (title, bool(passed), detail)
        assert passed, f"criterion {number} ({title}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {n}. {title}: {detail}")
