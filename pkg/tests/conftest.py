import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    Usage: ``criterion(n, title)`` at the top of the test; the outcome is
    filled in from the test result and echoed in the terminal summary.
    """
    holder = {}

    def declare(number: int, title: str):
        holder["number"], holder["title"] = number, title

    yield declare
    if "number" in holder:
        rep = getattr(request.node, "rep_call", None)
        status = "PASS" if rep is not None and rep.passed else "FAIL"
        line = f"[{status}] criterion {holder['number']}: {holder['title']}"
        ACCEPTANCE_LINES[holder["number"]] = line
        print(line)


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    if rep.when == "call":
        item.rep_call = rep
    return rep


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
