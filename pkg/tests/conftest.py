import numpy as np
import pytest

from qc_semilinear.geometry import DiskGrid
from qc_semilinear.logging import logger


# Keep the terminal to warnings and results, and never leave a log file behind
@pytest.fixture(autouse=True)
def quiet_logger(monkeypatch):
    monkeypatch.setenv("QC_SEMILINEAR_QUIET", "1")
    yield
    logger.log_file = None
    logger.logs.clear()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_grid():
    return DiskGrid(16, 32)


@pytest.fixture(scope="session")
def disk_grid():
    return DiskGrid(32, 64)
