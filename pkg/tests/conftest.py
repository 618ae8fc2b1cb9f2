import numpy as np
import pytest

from pwlcis.config import load_config
from pwlcis.pipeline import run_pipeline


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def example1_cfg():
    return load_config("example1")


@pytest.fixture(scope="session")
def example1_run(tmp_path_factory, example1_cfg):
    """One fused run of the bundled 2D example, shared by the slower tests."""
    out = tmp_path_factory.mktemp("example1")
    run_pipeline(example1_cfg, out, workers=1)
    return out


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
