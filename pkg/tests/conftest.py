"""Shared fixtures plus the acceptance summary printed after the run."""
import numpy as np
import pytest

import polyarima as pa
from polyarima import montecarlo as mc


class AcceptanceLog:
    """Collects one pass/fail line per acceptance criterion."""

    def __init__(self):
        self.lines = {}

    def record(self, number: int, title: str, passed: bool, detail: str = "") -> None:
        mark = "PASS" if passed else "FAIL"
        suffix = f"  [{detail}]" if detail else ""
        self.lines[number] = f"{mark}  criterion {number:>2}: {title}{suffix}"


def pytest_configure(config):
    config._acceptance_log = AcceptanceLog()


@pytest.fixture(scope="session")
def acceptance(request) -> AcceptanceLog:
    return request.config._acceptance_log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = getattr(config, "_acceptance_log", None)
    if log is None or not log.lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(log.lines):
        terminalreporter.write_line(log.lines[number])


# ---------------------------------------------------------------------------
# Shared desk-scale experiment runs (expensive; computed once per session).

GRID_A_SEED = 2024
GRID_B_SEED = 2024


@pytest.fixture(scope="session")
def grid_a_report() -> mc.MCReport:
    """ARIMA(1,1,0) phi=0.7, N=500, three innovation laws, 500 replications."""
    config = mc.ExperimentConfig(
        models=[pa.ModelSpec(phi=(0.7,), theta=(), d=1, intercept=None)],
        sample_sizes=[500],
        innovations=[
            pa.InnovationSpec("gaussian", {}),
            pa.InnovationSpec("gamma", {"shape": 2.0}),
            pa.InnovationSpec("chisquare", {"df": 3.0}),
        ],
        replications=500,
        bootstrap_resamples=1000,
        root_seed=GRID_A_SEED,
        estimators=("ols", "pmm2"),
    )
    return mc.run(config, workers=2)


@pytest.fixture(scope="session")
def grid_b_report() -> mc.MCReport:
    """ARIMA(1,1,1) (0.6, -0.4), N=500, gamma innovations, 500 replications."""
    config = mc.ExperimentConfig(
        models=[pa.ModelSpec(phi=(0.6,), theta=(-0.4,), d=1, intercept=None)],
        sample_sizes=[500],
        innovations=[pa.InnovationSpec("gamma", {"shape": 2.0})],
        replications=500,
        bootstrap_resamples=1000,
        root_seed=GRID_B_SEED,
        estimators=("css", "pmm2"),
    )
    return mc.run(config, workers=2)


def cell_by_label(report: mc.MCReport, fragment: str) -> mc.CellReport:
    for cell in report.cells:
        if fragment in cell.innovation_label:
            return cell
    raise KeyError(fragment)


def param_stat(cell: mc.CellReport, estimator: str, name: str):
    for stat in cell.estimators[estimator]:
        if stat.name == name:
            return stat
    raise KeyError((estimator, name))


def re_row(cell: mc.CellReport, name: str):
    for row in cell.re:
        if row.name == name:
            return row
    raise KeyError(name)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
