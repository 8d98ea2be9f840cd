import pytest

# nodeid -> (label, passed, detail) for acceptance criteria
_ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(label, passed, detail=""):
        passed = bool(passed)
        _ACCEPTANCE[request.node.nodeid] = (label, passed, detail)
        print(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
        assert passed, f"{label}: {detail}"

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    # a criterion that crashed before recording still gets a FAIL line
    if rep.when == "call" and rep.failed and "test_acceptance" in item.nodeid:
        _ACCEPTANCE.setdefault(item.nodeid, (item.name, False, "error before result was recorded"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    def order(row):
        head = row[0].split()[0]
        return (0, int(head)) if head.isdigit() else (1, row[0])

    for label, passed, detail in sorted(_ACCEPTANCE.values(), key=order):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
