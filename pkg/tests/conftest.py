import pytest

from subband_ffc import (Scheduler, evaluation_window, make_fullband_scenario,
                         make_synthetic_scenario, run)
from subband_ffc.analysis import attenuation_report

DESK_SAMPLES = 200_000

_CRITERIA = []


def record_criterion(number, passed, detail):
    """Store one acceptance line; printed in the terminal summary."""
    _CRITERIA.append((number, bool(passed), detail))
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in _CRITERIA:
        terminalreporter.write_line(
            f"criterion {number:<6} {'PASS' if passed else 'FAIL'}  {detail}")


class RunResult:
    """A finished closed-loop run with its steady-state attenuation."""

    def __init__(self, scenario, samples):
        import time

        self.scenario = scenario
        self.bank = scenario.make_bank()
        t0 = time.perf_counter()
        self.trace = run(Scheduler(scenario, self.bank), scenario, samples)
        self.seconds = time.perf_counter() - t0
        self.window = evaluation_window(self.trace.events, len(self.trace))
        self.attenuation_db = attenuation_report(
            self.trace.v_b + self.trace.n, self.trace.e, self.bank, *self.window)

    @property
    def regions(self):
        return self.trace.snapshots["regions"]

    @property
    def reasons(self):
        return [r["reason"] for r in self.regions]


@pytest.fixture(scope="session")
def desk_run():
    return RunResult(make_synthetic_scenario(difficulty="desk"), DESK_SAMPLES)


@pytest.fixture(scope="session")
def desk_noisy_run():
    return RunResult(make_synthetic_scenario(difficulty="desk", measurement_noise_db=40.0),
                     DESK_SAMPLES)


@pytest.fixture(scope="session")
def smoke_run():
    return RunResult(make_synthetic_scenario(difficulty="smoke"), 40_000)


@pytest.fixture(scope="session")
def full_run():
    return RunResult(make_synthetic_scenario(difficulty="full"), 90_000)


@pytest.fixture(scope="session")
def fullband_run():
    return RunResult(make_fullband_scenario(), 150_000)
