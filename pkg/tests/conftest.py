import contextlib

import pytest

from jccopf.casefile import load_shipped_case

ACCEPTANCE_LINES: list[str] = []


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record one PASS/FAIL line per acceptance criterion; failures still raise."""
    details: list[str] = []
    try:
        yield details
    except BaseException:
        ACCEPTANCE_LINES.append(f"[{number}] FAIL  {title}  {'; '.join(details)}")
        raise
    ACCEPTANCE_LINES.append(f"[{number}] PASS  {title}  {'; '.join(details)}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s[1:s.index("]")])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def five_bus():
    return load_shipped_case("five_bus")


@pytest.fixture(scope="session")
def three_bus():
    return load_shipped_case("three_bus")


@pytest.fixture(scope="session")
def adversarial():
    return load_shipped_case("adversarial")
