import math

import numpy as np
import pytest

from cmpmag.bloch import (BlochParameters, LinearRegimeError, absorbed_power,
                          demodulate_transverse, drive_power, integrate_bloch,
                          steady_state_transverse)
from cmpmag.constants import GAMMA, MU_B, TWO_PI

B0, T_S = 0.01, 1e-7


def resonant(tip=1e-3, polarization="linear", detuning=0.0):
    b1 = tip / (GAMMA * T_S)
    return BlochParameters(B0, b1, GAMMA * B0 + detuning, T_S, polarization=polarization)


def run(params, periods=14):
    limit = TWO_PI / (10 * max(params.larmor, params.omega1))
    return integrate_bloch(params, periods * T_S, 0.99 * limit)


@pytest.fixture(scope="module")
def linear_run():
    p = resonant()
    return p, run(p)


def test_absorbed_power_reference_value():
    # 1e21 spins at 10.4 GHz, 1e-18 T rotating field, 168 ns
    p = absorbed_power(1e21, TWO_PI * 10.4e9, 1e-18, 168e-9)
    oracle = (TWO_PI * 28e9) * 9.274e-24 * 1e21 * (TWO_PI * 10.4e9) * 1e-36 * 168e-9
    assert p == pytest.approx(oracle, rel=1e-12)
    assert p == pytest.approx(1.79e-23, rel=5e-3)


def test_corotating_amplitude():
    assert resonant().corotating_b1 == pytest.approx(resonant().b1 / 2)
    assert resonant(polarization="circular").corotating_b1 == resonant().b1


def test_default_equilibrium_magnetization():
    p = resonant()
    assert p.M0 == pytest.approx(p.n_s * MU_B)
    assert p.N_s == pytest.approx(p.n_s * p.sample_volume)


def test_linear_regime_guard():
    with pytest.raises(LinearRegimeError):
        steady_state_transverse(resonant(tip=0.5))


def test_max_step_must_resolve_precession():
    p = resonant()
    with pytest.raises(ValueError):
        integrate_bloch(p, T_S, 2 * TWO_PI / (10 * p.larmor))


def test_steady_state_amplitude_and_phase(linear_run):
    p, traj = linear_run
    amp, phase = steady_state_transverse(p)
    c = demodulate_transverse(traj, p.omega1)
    assert abs(c) == pytest.approx(amp, rel=1e-3)
    assert np.angle(c) == pytest.approx(phase, abs=1e-3)
    assert amp == pytest.approx(GAMMA * p.corotating_b1 * T_S * p.M0, rel=1e-12)


def test_trajectory_power_matches_absorbed_power(linear_run):
    p, traj = linear_run
    expected = absorbed_power(p.N_s, p.omega1, p.corotating_b1, p.T_s)
    assert drive_power(traj, p) == pytest.approx(expected, rel=1e-2)


def test_detuned_drive_lorentzian():
    d = 2 / T_S
    p = resonant(detuning=d)
    amp, phase = steady_state_transverse(p)
    assert amp == pytest.approx(GAMMA * p.corotating_b1 * p.M0 / math.hypot(d, 1 / T_S))
    c = demodulate_transverse(run(p), p.omega1)
    assert abs(c) == pytest.approx(amp, rel=2e-3)


def test_relaxation_to_equilibrium():
    p = BlochParameters(B0, 0.0, GAMMA * B0, T_S)
    m0 = np.array([0.3, 0.0, 0.5]) * p.M0
    traj = integrate_bloch(p, 3 * T_S, 0.9 * TWO_PI / (10 * p.larmor), m_init=m0)
    mz = traj.magnetization[-1, 2]
    assert mz == pytest.approx(p.M0 - 0.5 * p.M0 * math.exp(-3), rel=1e-6)
    assert np.hypot(*traj.magnetization[-1, :2]) == pytest.approx(0.3 * p.M0 * math.exp(-3),
                                                                  rel=1e-6)


def test_free_precession_is_clockwise():
    p = BlochParameters(B0, 0.0, GAMMA * B0, T_S)
    m0 = np.array([1.0, 0.0, 0.0]) * p.M0
    period = TWO_PI / p.larmor
    traj = integrate_bloch(p, period / 4, period / 40, m_init=m0)
    assert traj.magnetization[-1, 1] < -0.9 * p.M0 * math.exp(-period / 4 / T_S)


def test_trajectory_csv(tmp_path):
    p = resonant()
    traj = integrate_bloch(p, 5 * TWO_PI / p.larmor, 0.9 * TWO_PI / (10 * p.larmor))
    traj.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].split(",")[0] == "t_s"
    assert len(lines) == traj.times.size + 1
