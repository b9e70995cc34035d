import math

import pytest

from cmpmag.constants import GAMMA, TWO_PI
from cmpmag.hybrid import HybridSystemModel

OMEGA_C = TWO_PI * 10.7e9
G = TWO_PI * 100e6


def pmhs(g=G, gamma_c=TWO_PI * 8e6, gamma_m=TWO_PI * 5e6, kappa=TWO_PI * 1e6, detuning=0.0):
    b0 = (OMEGA_C + detuning) / GAMMA
    return HybridSystemModel.pmhs(OMEGA_C, gamma_c, gamma_m, g, bias_field=b0,
                                  kappas=(kappa, kappa))


@pytest.fixture
def model():
    return pmhs()


def rel(a, b):
    return abs(a - b) / abs(b)


__all__ = ["pmhs", "rel", "OMEGA_C", "G", "math"]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
