import numpy as np
import pytest

from spectral_gate.catalog import build_preset, laminate
from spectral_gate.fields import Grid
from spectral_gate.pencil import multiphase_pencil
from spectral_gate.projections import build_projection


@pytest.fixture
def grid8():
    return Grid((8, 8))


@pytest.fixture
def conductivity2d():
    return build_preset("conductivity", 2)


@pytest.fixture
def two_phase(grid8, conductivity2d):
    """Two-phase 2D conductivity laminate: (pencil, projector)."""
    pen = multiphase_pencil(laminate(grid8, 0, 0.5), [np.eye(2), np.eye(2)], conductivity2d.shape)
    return pen, build_projection(conductivity2d.symbol, grid8)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(number, title, passed, detail=""):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
