import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lgeom.corpus import get_model  # noqa: E402

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def models():
    return get_model


@pytest.fixture
def report(request):
    """report(n, ok, detail): print one acceptance line and keep it for the summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def emit(n, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
        print(line)
        lines.append(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
