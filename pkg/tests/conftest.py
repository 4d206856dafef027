import numpy as np
import pytest

from klmcnot import waveform as W


@pytest.fixture(scope="session")
def grid():
    return W.TimeGrid.centered()


@pytest.fixture(scope="session")
def presets(grid):
    """(memory, source) presets, memory delayed to maximize the overlap."""
    src = W.preset_source_waveform(grid)
    mem = W.preset_memory_waveform(grid)
    d, _ = W.best_delay(src, mem)
    return W.delay(mem, d), src


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


def random_density_matrix(rng, rank=4):
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    order = sorted(mod.RESULTS, key=lambda k: int(k.split()[0]))
    for key in order:
        terminalreporter.write_line(mod.RESULTS[key])
