import pytest

from meandim.lowdisc import default_direction_table


@pytest.fixture(scope="session")
def table():
    return default_direction_table()


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    results = test_acceptance.ACCEPTANCE
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, detail = results[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
