from __future__ import annotations

import time
from dataclasses import dataclass

import pytest

from nlosloc.experiment import run_scenario
from nlosloc.simulator import NOMINAL_NOISE, builtin_scenario

SCENARIOS = ("SA", "SB", "SC")
SEEDS = tuple(range(10))
DENSE_FACTOR = 4.0

_criteria: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")
    config.addinivalue_line("markers", "slow: runs full simulated scenarios")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    if rep.when == "call":
        status = "PASS" if rep.passed else "FAIL"
        if hasattr(rep, "wasxfail"):
            status = "FAIL"
            detail = detail or rep.wasxfail
        _criteria[n] = (status, title, detail)
    elif rep.failed:
        _criteria[n] = ("FAIL", title, f"{rep.when} error")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_criteria):
        status, title, detail = _criteria[n]
        line = f"{status} criterion {n:2d}: {title}"
        tr.write_line(line + (f" ({detail})" if detail else ""))


@pytest.fixture
def detail(request):
    """Attach a one-line measurement to the acceptance summary."""

    def record(text: str) -> None:
        request.node.user_properties.append(("detail", text))
        print(text)

    return record


@dataclass(frozen=True)
class SeededRuns:
    reports: dict  # (scenario, seed) -> ScenarioReport
    seconds: float


def _runs(density: float) -> SeededRuns:
    t0 = time.perf_counter()
    out = {}
    for name in SCENARIOS:
        for seed in SEEDS:
            sc = builtin_scenario(name, noise=NOMINAL_NOISE, seed=seed)
            out[name, seed] = run_scenario(sc, static_density=density).report
    return SeededRuns(out, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def nominal_runs() -> SeededRuns:
    """Every built-in scene over the seed set at nominal noise and default radar density."""
    return _runs(1.0)


@pytest.fixture(scope="session")
def dense_runs() -> SeededRuns:
    """Same scenes and seeds with static radar sampling four times denser."""
    return _runs(DENSE_FACTOR)
