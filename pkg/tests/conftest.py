import pytest

from coulomblab.acceptance import reference_run

OUTCOMES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def ref3():
    """Linear d=3 reference trajectory (gaussian shell, dr=5e-3, T=40) and its energy rows."""
    traj, rows, _ = reference_run(3)
    return traj, rows


@pytest.fixture(scope="session")
def ref4():
    traj, rows, _ = reference_run(4)
    return traj, rows


@pytest.fixture
def record_outcome(request):
    store = request.config.stash.setdefault(OUTCOMES, [])
    return store.append


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = config.stash.get(OUTCOMES, [])
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for o in sorted(outcomes, key=lambda o: o.number):
        terminalreporter.write_line(o.line())
    passed = sum(o.passed for o in outcomes)
    terminalreporter.write_line(f"{passed}/{len(outcomes)} criteria passed")
