import certify
import pytest

from der_mpc import qp


@pytest.fixture(scope="session", autouse=True)
def certify_every_solve():
    original = certify.install()
    yield certify.RECORD
    qp.QpSolver.solve = original


def pytest_collection_modifyitems(config, items):
    # acceptance runs last so the suite-wide KKT tally is complete
    items.sort(key=lambda item: item.nodeid.startswith("tests/test_acceptance.py"))


@pytest.fixture(scope="session")
def synthetic_day():
    from der_mpc.battery import table1_fleet
    from der_mpc.harness import synthetic_scenario

    return synthetic_scenario(table1_fleet(), days=1)


@pytest.fixture(scope="session")
def synthetic_day_result(synthetic_day):
    from der_mpc.harness import run

    return run(synthetic_day)


def pytest_terminal_summary(terminalreporter):
    verdicts = getattr(__import__("sys").modules.get("test_acceptance"), "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for number in sorted(verdicts):
            terminalreporter.write_line(verdicts[number])
