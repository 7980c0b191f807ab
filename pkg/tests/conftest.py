import pytest

from etfmanova import frames


@pytest.fixture(scope="session")
def pentagon():
    return frames.pentagon_etf()


@pytest.fixture(scope="session")
def dss7():
    return frames.build("dss", {"modulus": 7, "set": [1, 2, 4]})


@pytest.fixture(scope="session")
def paley11():
    return frames.build("paley_complex", {"q": 11})


# ---- acceptance report -----------------------------------------------------

_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def acceptance():
    """Record one verdict line per acceptance criterion, then assert it."""

    def record(tag: str, ok: bool, detail: str) -> None:
        _ACCEPTANCE[tag] = f"{tag} {'PASS' if ok else 'FAIL'}  {detail}"
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for tag in sorted(_ACCEPTANCE, key=lambda t: int(t[2:])):
        terminalreporter.write_line(_ACCEPTANCE[tag])
