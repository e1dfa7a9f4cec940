import pytest

_RESULTS: dict = {}


def pytest_addoption(parser):
    parser.addoption("--run-full", action="store_true", default=False,
                     help="also run the hours-long full-resolution acceptance variants")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-full"):
        return
    skip = pytest.mark.skip(reason="full-resolution variant; pass --run-full")
    for item in items:
        if "full" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def report(request):
    """Record one acceptance check: report(criterion, ok, detail)."""

    def record(criterion: int, ok: bool, detail: str):
        _RESULTS.setdefault(criterion, []).append((bool(ok), detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(_RESULTS):
        checks = _RESULTS[c]
        status = "PASS" if all(ok for ok, _ in checks) else "FAIL"
        terminalreporter.write_line(f"criterion {c}: {status} | " + "; ".join(d for _, d in checks))
