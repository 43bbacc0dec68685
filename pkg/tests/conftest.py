import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pnrqkd.channel import load_preset  # noqa: E402


@pytest.fixture(scope="session")
def gys():
    return load_preset("gys")


@pytest.fixture(scope="session")
def ideal():
    return load_preset("ideal")


@pytest.fixture(scope="session")
def fig2():
    return load_preset("gys-fig2")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
