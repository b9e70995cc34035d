"""Sidebands of a pumped hybrid system under longitudinal field modulation.

A slow field ``b2 * sin(omega2 t)`` along the bias shifts every magnon mode
by ``GAMMA * b2 * sin(omega2 t)``. In the frame rotating at the pump the
coupled-mode amplitudes obey

    da/dt = -1j * (M - w_p + GAMMA*b2*sin(omega2 t) * P) @ a - sqrt(kappa_in) * A_p * e_in

with ``M`` the loaded dynamical matrix and ``P`` the projector on magnon
modes. The output is ``y(t) = sqrt(kappa_out) * a_out(t)`` in sqrt(W), and the
periodic steady state is expanded as ``y = sum_n c_n exp(-1j n omega2 t)``,
so ``c_n`` sits at ``w_p + n * omega2``. With no modulation ``c_0`` equals
``A_p * s21(w_p)``.

Three independent routes produce the ``c_n``: time-domain integration
(:func:`simulate_modulated_pmhs`), a truncated Fourier-domain linear solve
(:func:`harmonic_balance_sidebands`) and, for a single mode, the exact
Jacobi-Anger series (:func:`single_mode_sidebands`).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import jv

from .constants import GAMMA, TWO_PI
from .hybrid import dynamical_matrix


class TransientNotConvergedError(RuntimeError):
    """Harmonic amplitudes still drift between successive modulation periods."""


class HarmonicTruncationError(RuntimeError):
    """The highest retained harmonic is not negligible against the carrier."""


class ModulationWarning(UserWarning):
    pass


def dbm_to_watts(dbm):
    return 1e-3 * 10 ** (dbm / 10)


def db_to_power_ratio(db):
    return 10 ** (db / 10)


@dataclass(frozen=True)
class ModulationDrive:
    b2: float  # T
    omega2: float  # rad/s
    pump_omega: float  # rad/s
    pump_power: float  # W, i.e. A_p**2

    def __post_init__(self):
        if self.b2 < 0:
            raise ValueError("b2 must be non-negative")
        if not (self.omega2 > 0 and self.pump_omega > 0 and self.pump_power > 0):
            raise ValueError("omega2, pump_omega and pump_power must be positive")
        if not self.omega2 < self.pump_omega / 10:
            raise ValueError("modulation must be slow compared with the pump (omega2 < w_p/10)")

    @property
    def pump_amplitude(self):
        return math.sqrt(self.pump_power)

    def check_against(self, bias_field):
        if self.b2 >= bias_field / 100:
            warnings.warn(f"b2={self.b2:.3g} T is not small against B0={bias_field:.3g} T",
                          ModulationWarning, stacklevel=3)


@dataclass(frozen=True, eq=False)
class ModulationRun:
    """Periodic steady-state output over one modulation period and its spectrum."""

    harmonics: np.ndarray  # integer n
    amplitudes: np.ndarray  # complex c_n, sqrt(W)
    pump_omega: float
    omega2: float
    times: np.ndarray = None
    output: np.ndarray = None
    settings: dict = field(default_factory=dict)

    def __post_init__(self):
        order = np.argsort(self.harmonics)
        object.__setattr__(self, "harmonics", np.asarray(self.harmonics)[order])
        object.__setattr__(self, "amplitudes", np.asarray(self.amplitudes)[order])
        if self.times is None:
            k = max(64, 4 * int(np.abs(self.harmonics).max()) + 4)
            t = np.arange(k) * (TWO_PI / self.omega2 / k)
            y = np.exp(-1j * np.outer(t, self.harmonics * self.omega2)) @ self.amplitudes
            object.__setattr__(self, "times", t)
            object.__setattr__(self, "output", y)

    @property
    def offsets(self):
        return self.harmonics * self.omega2

    @property
    def absolute_omegas(self):
        return self.pump_omega + self.offsets

    @property
    def powers(self):
        return np.abs(self.amplitudes) ** 2

    def amplitude(self, n):
        hit = np.nonzero(self.harmonics == n)[0]
        return complex(self.amplitudes[hit[0]]) if hit.size else 0j

    def power(self, n):
        return abs(self.amplitude(n)) ** 2

    @property
    def carrier_power(self):
        return self.power(0)

    @property
    def time_averaged_power(self):
        return float(np.mean(np.abs(self.output) ** 2))

    def to_csv(self, path):
        p0 = self.carrier_power
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["harmonic", "offset_hz", "power_w", "power_dbc"])
            for n, off, p in zip(self.harmonics, self.offsets, self.powers):
                dbc = 10 * math.log10(p / p0) if p > 0 and p0 > 0 else float("-inf")
                w.writerow([int(n), repr(float(off / TWO_PI)), repr(float(p)), repr(dbc)])


def _ports(model, input_port, output_port):
    if output_port is None:
        output_port = 1 if len(model.ports) > 1 else 0
    pin, pout = model.ports[input_port], model.ports[output_port]
    if not (pin.kappa > 0 and pout.kappa > 0):
        raise ValueError("pump and readout ports need positive coupling")
    return pin, pout


def _linear_system(model, drive, input_port, output_port):
    pin, pout = _ports(model, input_port, output_port)
    m = dynamical_matrix(model, loaded=True) - drive.pump_omega * np.eye(model.n_modes)
    proj = np.zeros(model.n_modes)
    proj[model.magnon_indices] = 1.0
    src = np.zeros(model.n_modes, dtype=complex)
    src[pin.mode] = math.sqrt(pin.kappa) * drive.pump_amplitude
    return m, proj, src, pin, pout


def simulate_modulated_pmhs(model, drive, n_periods=2, input_port=0, output_port=None,
                            samples_per_period=256, rtol=1e-10, settle_tol=1e-10,
                            convergence_tol=1e-7, method="DOP853"):
    """Time-domain periodic steady state of the modulated, pumped system.

    Starts from the unmodulated steady state, discards ``max(10,
    ln(1/settle_tol))`` amplitude-damping times of the slowest hybrid mode
    (rounded up to whole modulation periods), then records ``n_periods``
    periods. The spectrum comes from the last period; it is compared with
    the one before and ``TransientNotConvergedError`` is raised if any
    harmonic moved by more than ``convergence_tol`` of the carrier.
    """
    if n_periods < 2:
        raise ValueError("need at least two recorded periods for the convergence check")
    drive.check_against(model.bias_field)
    m, proj, src, pin, pout = _linear_system(model, drive, input_port, output_port)
    decay = float(np.min(-np.linalg.eigvals(m).imag))
    if not decay > 0:
        raise ValueError("every hybrid mode must be damped")

    period = TWO_PI / drive.omega2
    n_decay = max(10.0, math.log(1 / settle_tol))
    n_skip = math.ceil(n_decay / decay / period)
    t_end = (n_skip + n_periods) * period
    k = samples_per_period
    t_rec = n_skip * period + np.arange(n_periods * k) * (period / k)

    a0 = np.linalg.solve(1j * m, -src)
    mod = GAMMA * drive.b2
    w2 = drive.omega2
    minus_im = -1j * m

    def rhs(t, a):
        return minus_im @ a - 1j * (mod * math.sin(w2 * t)) * (proj * a) - src

    scale = np.max(np.abs(a0))
    sol = solve_ivp(rhs, (0.0, t_end), a0, method=method, t_eval=t_rec, rtol=rtol,
                    atol=rtol * scale)
    if sol.status != 0:
        raise RuntimeError(f"integration failed: {sol.message}")
    y = math.sqrt(pout.kappa) * sol.y[pout.mode]
    spectra = [np.fft.ifft(y[i * k:(i + 1) * k]) for i in range(n_periods)]
    c = spectra[-1]
    drift = np.max(np.abs(spectra[-1] - spectra[-2]))
    if drift > convergence_tol * abs(c[0]):
        raise TransientNotConvergedError(
            f"harmonics changed by {drift / abs(c[0]):.3g} of the carrier between periods")
    n = np.fft.fftfreq(k, 1.0 / k).astype(int)
    settings = {"method": "time-domain", "discarded_periods": n_skip,
                "samples_per_period": k, "rtol": rtol, "input_port": input_port,
                "output_port": output_port, "b2": drive.b2, "omega2": drive.omega2,
                "pump_omega": drive.pump_omega, "pump_power": drive.pump_power}
    t_last = t_rec[-k:] - t_rec[-k]
    return ModulationRun(n, c, drive.pump_omega, drive.omega2, t_last, y[-k:], settings)


def harmonic_balance_sidebands(model, drive, n_harmonics=16, input_port=0, output_port=None,
                               truncation_tol=1e-3):
    """Fourier-domain periodic steady state truncated at ``|n| <= n_harmonics``.

    The sinusoidal frequency shift couples harmonic ``n`` to ``n +- 1``::

        1j*(M - w_p - n*omega2) c_n + (GAMMA*b2/2) P (c_{n+1} - c_{n-1}) = -src * delta_n0

    and the block-tridiagonal system is solved directly.
    """
    if n_harmonics < 3:
        raise ValueError("n_harmonics must be at least 3")
    drive.check_against(model.bias_field)
    m, proj, src, pin, pout = _linear_system(model, drive, input_port, output_port)
    nm = model.n_modes
    orders = np.arange(-n_harmonics, n_harmonics + 1)
    size = nm * orders.size
    big = np.zeros((size, size), dtype=complex)
    rhs = np.zeros(size, dtype=complex)
    half = 0.5 * GAMMA * drive.b2 * np.diag(proj)
    eye = np.eye(nm)
    for i, n in enumerate(orders):
        blk = slice(i * nm, (i + 1) * nm)
        big[blk, blk] = 1j * (m - n * drive.omega2 * eye)
        if i + 1 < orders.size:
            big[blk, (i + 1) * nm:(i + 2) * nm] = half
        if i > 0:
            big[blk, (i - 1) * nm:i * nm] = -half
    rhs[n_harmonics * nm:(n_harmonics + 1) * nm] = -src
    sol = np.linalg.solve(big, rhs).reshape(orders.size, nm)
    c = math.sqrt(pout.kappa) * sol[:, pout.mode]
    edge = max(abs(c[0]), abs(c[-1]))
    if edge > truncation_tol * abs(c[n_harmonics]):
        raise HarmonicTruncationError(
            f"harmonic {n_harmonics} at {edge / abs(c[n_harmonics]):.3g} of the carrier")
    settings = {"method": "harmonic-balance", "n_harmonics": n_harmonics,
                "input_port": input_port, "output_port": output_port, "b2": drive.b2,
                "omega2": drive.omega2, "pump_omega": drive.pump_omega,
                "pump_power": drive.pump_power}
    return ModulationRun(orders, c, drive.pump_omega, drive.omega2, settings=settings)


def single_mode_sidebands(model, drive, n_harmonics=8, input_port=0, output_port=None,
                          n_bessel=None):
    """Exact sidebands of a single modulated mode via the Jacobi-Anger series.

    ``c_n = -s * sum_k i**(-n-k) (-i)**k J_{-n-k}(beta) J_k(beta) / (a + 1j*k*omega2)``
    with ``beta = GAMMA*b2/omega2`` and ``a = gamma_tot/2 + 1j*(w_m - w_p)``.
    """
    if model.n_modes != 1:
        raise ValueError("closed form only for a single mode")
    m, proj, src, pin, pout = _linear_system(model, drive, input_port, output_port)
    beta = proj[0] * GAMMA * drive.b2 / drive.omega2
    a = 1j * m[0, 0]
    if n_bessel is None:
        n_bessel = n_harmonics + int(math.ceil(abs(beta))) + 30
    k = np.arange(-n_bessel, n_bessel + 1)
    orders = np.arange(-n_harmonics, n_harmonics + 1)
    terms = ((-1j) ** k * jv(k, beta) / (a + 1j * k * drive.omega2))[None, :]
    j = -orders[:, None] - k[None, :]
    c = -src[0] * np.sum((1j) ** j * jv(j, beta) * terms, axis=1)
    c = math.sqrt(pout.kappa) * c
    return ModulationRun(orders, c, drive.pump_omega, drive.omega2,
                         settings={"method": "jacobi-anger", "beta": beta})


def phase_modulation_ratio(beta, n=1):
    """``|J_n(beta) / J_0(beta)|`` for pure phase modulation of index ``beta``."""
    return abs(jv(n, beta) / jv(0, beta))


def first_sideband_level(A_p, Q, b2, B0):
    """First-sideband level ``pi * A_p**2 * Q * b2 / (2 * B0)`` (W for A_p in sqrt(W))."""
    if not (A_p > 0 and Q > 0 and B0 > 0) or b2 < 0:
        raise ValueError("A_p, Q and B0 must be positive and b2 non-negative")
    return math.pi * A_p ** 2 * Q * b2 / (2 * B0)


def waveguide_filter(run, cutoff_omega, stopband_attenuation):
    """Ideal high-pass: power below ``cutoff_omega`` divided by the attenuation."""
    if stopband_attenuation < 1:
        raise ValueError("stopband attenuation must be >= 1")
    gain = np.where(np.abs(run.absolute_omegas) < cutoff_omega,
                    1 / math.sqrt(stopband_attenuation), 1.0)
    settings = dict(run.settings, cutoff_omega=cutoff_omega,
                    stopband_attenuation=stopband_attenuation)
    return replace(run, amplitudes=run.amplitudes * gain, times=None, output=None,
                   settings=settings)
