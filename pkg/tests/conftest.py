import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from torusnls import Grid2D, SpectralField  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_field(grid, rng, decay=0.0):
    c = rng.standard_normal((grid.M, grid.M)) + 1j * rng.standard_normal((grid.M, grid.M))
    if decay:
        c = c * grid.bracket(-decay)
    return SpectralField(grid, c)


@pytest.fixture
def make_field(rng):
    def make(M, decay=0.0):
        return random_field(Grid2D(M), rng, decay)
    return make


# one line per acceptance criterion, repeated in the terminal summary so it
# survives output capture
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line, flush=True)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
