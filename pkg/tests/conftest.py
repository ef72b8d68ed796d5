import numpy as np
import pytest
from hypothesis import settings

from simlab.fluid import compute_fluid
from simlab.model import ModelParams, PolicySpec

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def std_params():
    return ModelParams(beta=2.5, theta=1.0, alpha=2.0, b=2.0, d=1)


@pytest.fixture(scope="session")
def lagging_params():
    return ModelParams(beta=2.5, theta=1.0, alpha=2.0, b=1.0, d=1)


@pytest.fixture(scope="session")
def linear1():
    return PolicySpec.linear(1.0)


@pytest.fixture(scope="session")
def std_fluid(std_params, linear1):
    return compute_fluid(std_params, linear1, 20.0)


@pytest.fixture(scope="session")
def lagging_fluid(lagging_params, linear1):
    return compute_fluid(lagging_params, linear1, 20.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        for key, value in report.user_properties:
            if key == "criterion":
                _ACCEPTANCE[value] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {k}: {'PASS' if _ACCEPTANCE[k] == 'passed' else 'FAIL'}")
