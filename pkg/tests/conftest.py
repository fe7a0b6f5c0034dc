from __future__ import annotations

import pytest

from opera.analysis import generate_expanding_opera
from opera.experiments import desk_networks
from opera.schedule import build_schedule
from opera.topology import eight_rack_topology


@pytest.fixture(scope="session")
def k12():
    """The 108-rack radix-12 network and its schedule (seed 0)."""
    t, _ = generate_expanding_opera(12, 108, 0, max_diameter=5)
    return t, build_schedule(t)


@pytest.fixture(scope="session")
def eight_rack():
    t = eight_rack_topology()
    return t, build_schedule(t)


@pytest.fixture(scope="session")
def desk():
    return desk_networks(0)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


@pytest.fixture
def acceptance_log(request):
    """Record (criterion number, passed, detail) for the end-of-run summary."""
    log = request.config.stash[ACCEPTANCE_KEY]

    def record(num: int, ok: bool, detail: str) -> None:
        log[num] = (ok, detail)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(ACCEPTANCE_KEY, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(log):
        ok, detail = log[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {num:2d}: {detail}")
