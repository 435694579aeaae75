import pytest

import builders


@pytest.fixture(scope="session")
def taxonomy():
    return builders.fixture_taxonomy()


@pytest.fixture(scope="session")
def popularity():
    return builders.fixture_popularity()


_VERDICTS: list[str] = []


@pytest.fixture
def verdict(request):
    """``verdict(ok, detail)`` records a PASS/FAIL line for the run summary, then asserts ``ok``."""

    def record(ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {request.node.name}: {detail}"
        _VERDICTS.append(line)
        print(line)
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
