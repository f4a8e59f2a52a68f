import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from chemostat_delay import ChemostatModel, History, TimeFunction, UptakeFunction  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = sorted((ROOT / "scenarios").glob("*.json"))


@pytest.fixture
def monod21():
    return UptakeFunction.monod(2.0, 1.0)


@pytest.fixture
def const_model(monod21):
    # p(s0) = 1, D = 0.5, tau = 1: persistent
    return ChemostatModel(monod21, TimeFunction.constant(1.0), TimeFunction.constant(0.5), 1.0)


@pytest.fixture
def periodic_model(monod21):
    w = 2 * math.pi
    return ChemostatModel(monod21, TimeFunction.sampled(lambda t: 1 + 0.5 * np.sin(t), w),
                          TimeFunction.sampled(lambda t: 0.5 + 0.25 * np.cos(t), w), 1.0)


@pytest.fixture
def counter_model():
    w = 2 * math.pi
    return ChemostatModel(UptakeFunction.monod(w, 1.0), TimeFunction.constant(1.0),
                          TimeFunction.sampled(lambda t: 1 - np.sin(t), w), math.pi / 2)


@pytest.fixture
def hist1():
    return History.constant(1.0, 0.1, 1.0)


_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _ACCEPTANCE.append((report.nodeid.split("::")[-1], report.outcome))
    elif "test_acceptance.py" in report.nodeid and report.when == "setup" and report.failed:
        _ACCEPTANCE.append((report.nodeid.split("::")[-1], "failed"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
