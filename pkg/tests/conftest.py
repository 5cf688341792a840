import pytest

ACCEPTANCE: dict[int, tuple[str, bool]] = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of an acceptance criterion under its number."""
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    ACCEPTANCE[number] = (title, False)
    yield
    report = getattr(request.node, "rep_call", None)
    ACCEPTANCE[number] = (title, bool(report and report.passed))


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    if report.when == "call":
        item.rep_call = report
    return report


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {title}")
