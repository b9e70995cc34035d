"""Bloch dynamics of a transversely driven magnetization.

The equation of motion is

    dM/dt = GAMMA * M x (b1 * e_drive(t) + B0 z) - (M - M0 z) / T_s

with a single relaxation time for all components. Precession is clockwise
about +z, i.e. ``Mx + 1j*My`` goes as ``exp(-1j * GAMMA * B0 * t)``.

A linearly polarised drive ``b1 cos(w1 t) x`` is the sum of two circular
components of amplitude ``b1/2``; only the one turning with the precession
is resonant. Closed-form results (:func:`steady_state_transverse`,
:func:`absorbed_power`) are written in terms of that co-rotating amplitude,
``BlochParameters.corotating_b1``. The integrator keeps both components.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .constants import GAMMA, MU_B


class IntegrationError(RuntimeError):
    """The adaptive integrator failed (step-size underflow or tolerance not met)."""


class LinearRegimeError(ValueError):
    """Drive strong enough that linear response does not apply."""


POLARIZATIONS = ("linear", "circular")


@dataclass(frozen=True)
class BlochParameters:
    B0: float  # static field along z, T
    b1: float  # drive amplitude, T
    omega1: float  # drive angular frequency, rad/s
    T_s: float  # relaxation time, s
    n_s: float = 2e28  # spin density, 1/m^3 (YIG)
    sample_volume: float = 1e-9  # m^3
    M0: float | None = None  # A/m; defaults to n_s * MU_B
    polarization: str = "linear"

    def __post_init__(self):
        if not self.T_s > 0:
            raise ValueError("T_s must be positive")
        if self.b1 < 0:
            raise ValueError("b1 must be non-negative")
        if self.B0 < 0 or self.omega1 < 0:
            raise ValueError("B0 and omega1 must be non-negative")
        if self.n_s < 0 or self.sample_volume < 0:
            raise ValueError("spin density and volume must be non-negative")
        if self.polarization not in POLARIZATIONS:
            raise ValueError(f"polarization must be one of {POLARIZATIONS}")
        if self.M0 is None:
            object.__setattr__(self, "M0", self.n_s * MU_B)

    @property
    def N_s(self):
        return self.n_s * self.sample_volume

    @property
    def larmor(self):
        return GAMMA * self.B0

    @property
    def corotating_b1(self):
        return self.b1 / 2 if self.polarization == "linear" else self.b1

    @property
    def tip_parameter(self):
        return GAMMA * self.b1 * self.T_s

    @property
    def linear_response(self):
        return self.tip_parameter < 0.1


@dataclass(frozen=True, eq=False)
class BlochTrajectory:
    times: np.ndarray
    magnetization: np.ndarray  # shape (n, 3), A/m

    @property
    def transverse(self):
        return self.magnetization[:, 0] + 1j * self.magnetization[:, 1]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "Mx_A_per_m", "My_A_per_m", "Mz_A_per_m"])
            for t, m in zip(self.times, self.magnetization):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in m])


def _drive(params):
    b1, w1 = params.b1, params.omega1
    if params.polarization == "linear":
        return lambda t: (b1 * math.cos(w1 * t), 0.0)
    return lambda t: (b1 * math.cos(w1 * t), -b1 * math.sin(w1 * t))


def integrate_bloch(params, duration, max_step, m_init=None, rtol=1e-9, method="DOP853",
                    samples_per_period=32):
    """Integrate the driven Bloch equation from ``m_init`` (default ``M0 z``).

    The state is the deviation from equilibrium so the tolerances act on the
    small driven response rather than on ``M0``. Samples are uniform with
    ``samples_per_period`` points per drive period (per Larmor period if the
    drive frequency is zero).
    """
    w_fast = max(params.larmor, params.omega1)
    if not duration > 0:
        raise ValueError("duration must be positive")
    if w_fast > 0 and not max_step < 2 * math.pi / (10 * w_fast):
        raise ValueError(f"max_step must be below {2 * math.pi / (10 * w_fast):.3g} s")

    m0 = params.M0
    start = np.array([0.0, 0.0, m0]) if m_init is None else np.asarray(m_init, dtype=float)
    d0 = start - np.array([0.0, 0.0, m0])
    scale = max(np.linalg.norm(d0), GAMMA * params.corotating_b1 * params.T_s * m0, 1e-300)
    atol = rtol * scale

    g, bz, inv_t = GAMMA, params.B0, 1.0 / params.T_s
    drive = _drive(params)

    def rhs(t, d):
        bx, by = drive(t)
        mx, my, mz = d[0], d[1], d[2] + m0
        return [
            g * (my * bz - mz * by) - d[0] * inv_t,
            g * (mz * bx - mx * bz) - d[1] * inv_t,
            g * (mx * by - my * bx) - d[2] * inv_t,
        ]

    w_ref = params.omega1 if params.omega1 > 0 else params.larmor
    dt = 2 * math.pi / w_ref / samples_per_period if w_ref > 0 else max_step
    times = np.arange(int(math.floor(duration / dt + 1e-9)) + 1) * dt
    sol = solve_ivp(rhs, (0.0, times[-1]), d0, method=method, t_eval=times,
                    rtol=rtol, atol=atol, max_step=max_step)
    if sol.status != 0:
        raise IntegrationError(sol.message)
    mag = sol.y.T.copy()
    mag[:, 2] += m0
    return BlochTrajectory(sol.t, mag)


def _last_periods(traj, omega, n_periods):
    t = traj.times
    dt = t[1] - t[0]
    per_period = 2 * math.pi / omega / dt
    k = int(round(per_period))
    if abs(per_period - k) > 1e-6 * per_period:
        raise ValueError("trajectory is not sampled on an integer grid per period")
    n = k * n_periods
    if n > t.size:
        raise ValueError("trajectory shorter than the requested averaging window")
    return slice(t.size - n, t.size)


def demodulate_transverse(traj, omega1, n_periods=10):
    """Complex amplitude ``c`` with ``Mx + 1j*My ~ c * exp(-1j * omega1 * t)``.

    Averaged over the last ``n_periods`` drive periods; the counter-rotating
    component at ``+omega1`` drops out exactly on that window.
    """
    sl = _last_periods(traj, omega1, n_periods)
    return complex(np.mean(traj.transverse[sl] * np.exp(1j * omega1 * traj.times[sl])))


def drive_power(traj, params, n_periods=10):
    """Cycle-averaged power taken from the drive, ``-V <M . dB/dt>`` (W)."""
    sl = _last_periods(traj, params.omega1, n_periods)
    t, m = traj.times[sl], traj.magnetization[sl]
    b1, w1 = params.b1, params.omega1
    dbx = -b1 * w1 * np.sin(w1 * t)
    dby = -b1 * w1 * np.cos(w1 * t) if params.polarization == "circular" else 0.0
    return float(-params.sample_volume * np.mean(m[:, 0] * dbx + m[:, 1] * dby))


def steady_state_transverse(params):
    """Linear-response steady state, returning ``(amplitude, phase)``.

    ``Mx = amplitude * cos(omega1 t - phase)`` with
    ``amplitude = GAMMA * b_co * M0 / sqrt(detuning**2 + T_s**-2)`` and
    ``b_co`` the co-rotating drive amplitude. On resonance the phase lag is
    pi/2 and ``amplitude = GAMMA * b_co * T_s * M0``.
    """
    if not params.linear_response:
        raise LinearRegimeError(
            f"GAMMA*b1*T_s = {params.tip_parameter:.3g} exceeds linear-response limit 0.1")
    detuning = params.larmor - params.omega1
    amp = GAMMA * params.corotating_b1 * params.M0 / math.hypot(detuning, 1 / params.T_s)
    phase = math.pi / 2 - math.atan(detuning * params.T_s)
    return amp, phase


def absorbed_power(N_s, omega1, b1, T_s):
    """Power deposited by a resonant rotating field of amplitude ``b1``.

    ``P = GAMMA * MU_B * N_s * omega1 * b1**2 * T_s``; for a linear drive use
    the co-rotating amplitude.
    """
    if not (N_s > 0 and omega1 > 0 and T_s > 0) or b1 < 0:
        raise ValueError("N_s, omega1 and T_s must be positive and b1 non-negative")
    return GAMMA * MU_B * N_s * omega1 * b1 ** 2 * T_s
