import numpy as np
import pytest

from uqtube.sim import default_config, offline_artifacts


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def ta(cfg):
    return offline_artifacts(cfg)


@pytest.fixture(scope="session")
def W(cfg):
    return cfg.W


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}


@pytest.fixture
def report():
    def record(number, ok, detail):
        _CRITERIA[number] = (ok, detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA, key=lambda n: (isinstance(n, str), n)):
        ok, detail = _CRITERIA[number]
        label = f"criterion {number}" if isinstance(number, int) else number
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
