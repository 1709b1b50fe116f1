import numpy as np
import pytest

from remsim.netcalc import WaveContext
from remsim.radiating import AngularGrid, synthesize_array
from remsim.rems import RemsModel, RfFrontend, TuningNetwork


@pytest.fixture(scope="session")
def grid5():
    return AngularGrid.regular(5.0)


@pytest.fixture(scope="session")
def grid10():
    return AngularGrid.regular(10.0)


@pytest.fixture(scope="session")
def array44(grid5):
    return synthesize_array(4, 4, 0.25, grid=grid5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_passive(rng, n, scale=0.9):
    """Random complex n x n matrix with spectral norm ``scale``."""
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * a / np.linalg.norm(a, 2)


def random_model(rng, grid, n=None, m=None):
    """Random passive REMS on a small synthetic array."""
    shapes = [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3), (2, 4), (4, 4)]
    if m is None:
        rows, cols = shapes[rng.integers(len(shapes))]
    else:
        rows, cols = next(s for s in shapes if s[0] * s[1] == m)
    m = rows * cols
    n = int(rng.integers(1, min(4, m) + 1)) if n is None else n
    eff = float(rng.uniform(0.5, 1.0))
    rad = synthesize_array(rows, cols, float(rng.uniform(0.2, 0.6)), efficiency=eff,
                           exponent=float(rng.uniform(0, 2)), grid=grid, ctx=WaveContext(12e9))
    z = rng.uniform(5, 100, n) + 1j * rng.uniform(-40, 40, n)
    tuning = TuningNetwork(random_passive(rng, n + m, float(rng.uniform(0.5, 0.99))), n)
    return RemsModel(RfFrontend(z), tuning, rad)


ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Store the PASS/FAIL line shown in the terminal summary."""
    ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
