import math

import pytest

from cavitylab import CavityGeometry


@pytest.fixture
def geom():
    # 1 m cavity, 1 mm beam radius, Nd:YAG line
    return CavityGeometry(L=1.0, A=math.pi * 1e-6, wavelength=1.064e-6, delta1=1e-5)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
