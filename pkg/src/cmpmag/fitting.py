"""Least-squares extraction of coupled-oscillator parameters from anticrossing maps.

Free parameters are addressed by name:

``omega:i``   bare frequency of cavity mode ``i`` (rad/s)
``gamma:i``   intrinsic linewidth of mode ``i`` (rad/s)
``offset:i``  anisotropy offset of magnon mode ``i`` (rad/s)
``g:i-j``     coupling between modes ``i`` and ``j`` (rad/s)
``kappa:p``   coupling rate of port ``p`` (rad/s)
``scale``     overall multiplicative factor on ``|S21|`` (dimensionless)
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares

from .constants import GAMMA, HBAR, MU_0, TWO_PI
from .hybrid import HybridSystemModel, ModeKind, Port, anticrossing_map, spectrum_peaks


class FitConvergenceError(RuntimeError):
    """The optimiser stopped on its evaluation budget."""


class NonIdentifiableError(RuntimeError):
    """The Jacobian is rank deficient at the solution."""

    def __init__(self, message, combination):
        super().__init__(message)
        self.combination = combination


LOSSES = ("linear", "log")


def _split(name):
    kind, _, idx = name.partition(":")
    return kind, idx


def get_parameter(model, name, scale=1.0):
    kind, idx = _split(name)
    if kind == "scale":
        return scale
    if kind in ("omega", "gamma", "offset"):
        mode = model.modes[int(idx)]
        if kind == "omega" and mode.kind is ModeKind.MAGNON:
            raise ValueError("magnon frequency follows the bias field; fit offset:i instead")
        return {"omega": mode.omega, "gamma": mode.gamma, "offset": mode.field_offset}[kind]
    if kind == "g":
        i, j = (int(s) for s in idx.split("-"))
        return float(model.couplings[i, j])
    if kind == "kappa":
        return model.ports[int(idx)].kappa
    raise KeyError(f"unknown parameter {name!r}")


def set_parameters(model, values):
    """Copy of ``model`` with named parameters replaced (``scale`` ignored)."""
    modes = list(model.modes)
    g = np.array(model.couplings)
    ports = list(model.ports)
    for name, v in values.items():
        kind, idx = _split(name)
        if kind == "scale":
            continue
        if kind == "omega":
            modes[int(idx)] = replace(modes[int(idx)], omega=v)
        elif kind == "gamma":
            modes[int(idx)] = replace(modes[int(idx)], gamma=v)
        elif kind == "offset":
            modes[int(idx)] = replace(modes[int(idx)], field_offset=v)
        elif kind == "g":
            i, j = (int(s) for s in idx.split("-"))
            g[i, j] = g[j, i] = v
        elif kind == "kappa":
            ports[int(idx)] = Port(ports[int(idx)].mode, v)
        else:
            raise KeyError(f"unknown parameter {name!r}")
    return HybridSystemModel(tuple(modes), g, model.bias_field, tuple(ports))


def pmhs_parameters(model):
    """Standard free set for a cavity + magnon model: omega_c, g, gamma_c, gamma_m."""
    c, m = model.cavity_indices[0], model.magnon_indices[0]
    return (f"omega:{c}", f"g:{min(c, m)}-{max(c, m)}", f"gamma:{c}", f"gamma:{m}")


@dataclass(frozen=True, eq=False)
class FitProblem:
    data: object  # SpectrumMap, magnitude used
    template: HybridSystemModel
    free: tuple = ()
    initial: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    loss: str = "linear"
    input_port: int = 0
    output_port: int = 1

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        object.__setattr__(self, "free", tuple(self.free))
        n_data = self.data.values.size
        if self.free and not len(self.free) < n_data / 10:
            raise ValueError("too many free parameters for the amount of data")
        for name in self.free:
            lo, hi = _bounds(self, name)
            x0 = self.start_value(name)
            if not lo <= x0 <= hi:
                raise ValueError(f"initial {name}={x0!r} outside bounds {(lo, hi)}")

    def start_value(self, name):
        if name in self.initial:
            return float(self.initial[name])
        if name == "scale":
            return 1.0
        return get_parameter(self.template, name)

    def model_for(self, values):
        return set_parameters(self.template, {**self.initial, **values})

    def forward(self, values):
        model = self.model_for(values)
        spec = anticrossing_map(model, self.data.field_axis, self.data.frequency_axis,
                                self.input_port, self.output_port)
        return {**self.initial, **values}.get("scale", 1.0) * spec.magnitude

    def residuals(self, values):
        f = self.forward(values)
        d = self.data.magnitude
        if self.loss == "log":
            return (np.log(f) - np.log(d)).ravel()
        return (f - d).ravel()


@dataclass(frozen=True, eq=False)
class FitResult:
    parameters: dict
    stderr: dict
    residual_norm: float
    initial_residual_norm: float
    n_evaluations: int
    termination: str
    model: HybridSystemModel
    residual_map: np.ndarray

    def to_keyvalue(self):
        lines = [f"residual_norm = {self.residual_norm!r}",
                 f"initial_residual_norm = {self.initial_residual_norm!r}",
                 f"n_evaluations = {self.n_evaluations}",
                 f"termination = {self.termination}"]
        for k, v in self.parameters.items():
            unit = "1" if k == "scale" else "rad/s"
            lines.append(f"{k} = {v!r}  # {unit}, stderr {self.stderr.get(k, float('nan'))!r}")
        return "\n".join(lines) + "\n"

    def write_residual_csv(self, path, data):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["field_T\\frequency_Hz"]
                       + [repr(float(x)) for x in data.frequency_axis / TWO_PI])
            for b, row in zip(data.field_axis, self.residual_map):
                w.writerow([repr(float(b))] + [repr(float(x)) for x in row])


def _default_bounds(name):
    kind = _split(name)[0]
    if kind in ("gamma", "g", "kappa", "scale", "omega"):
        return (0.0, np.inf)
    return (-np.inf, np.inf)


def _bounds(problem, name):
    return problem.bounds.get(name, _default_bounds(name))


def _unit(name, problem):
    if name == "scale":
        return max(abs(problem.start_value("scale")), 1e-300)
    span = problem.data.frequency_axis[-1] - problem.data.frequency_axis[0]
    return span / 100


def fit_anticrossing(problem, max_nfev=200, tol=1e-12, rank_tol=1e-10):
    """Local trust-region least squares of the forward transmission model.

    Parameters are optimised as dimensionless offsets from the start values.
    Standard errors come from ``s**2 (J^T J)^-1`` at the solution with
    ``s**2`` the residual variance.
    """
    free = problem.free
    x0 = np.array([problem.start_value(n) for n in free])
    units = np.array([_unit(n, problem) for n in free])
    fixed = {"scale": problem.start_value("scale")}

    def values(u):
        return dict(fixed, **{n: x for n, x in zip(free, x0 + u * units)})

    r0 = problem.residuals(values(np.zeros(len(free))))
    norm0 = float(np.linalg.norm(r0))
    shape = problem.data.values.shape
    if not free:
        return FitResult({}, {}, norm0, norm0, 1, "no free parameters", problem.model_for({}),
                         r0.reshape(shape))

    lo = np.array([_bounds(problem, n)[0] for n in free])
    hi = np.array([_bounds(problem, n)[1] for n in free])
    res = least_squares(lambda u: problem.residuals(values(u)), np.zeros(len(free)),
                        bounds=((lo - x0) / units, (hi - x0) / units), method="trf",
                        jac="3-point", xtol=tol, ftol=tol, gtol=tol, max_nfev=max_nfev)
    if res.status == 0:
        raise FitConvergenceError(f"no convergence after {res.nfev} evaluations")

    best = values(res.x)
    jac = res.jac
    sv, vt = np.linalg.svd(jac, full_matrices=False)[1:]
    if sv[-1] < rank_tol * sv[0]:
        combo = {n: float(c) for n, c in zip(free, vt[-1]) if abs(c) > 1e-3}
        raise NonIdentifiableError(f"singular Jacobian along {combo}", combo)
    dof = max(res.fun.size - len(free), 1)
    s2 = float(res.fun @ res.fun) / dof
    cov = s2 * np.linalg.inv(jac.T @ jac)
    stderr = {n: float(math.sqrt(cov[i, i]) * units[i]) for i, n in enumerate(free)}
    norm = float(np.linalg.norm(res.fun))
    if norm > norm0:
        raise FitConvergenceError("optimiser returned a worse point than the start")
    params = {n: float(best[n]) for n in free}
    return FitResult(params, stderr, norm, norm0, int(res.nfev), res.message,
                     problem.model_for(best), res.fun.reshape(shape))


def _fwhm(axis, row, idx):
    half = row[idx] / 2
    lo = idx
    while lo > 0 and row[lo] > half:
        lo -= 1
    hi = idx
    while hi < row.size - 1 and row[hi] > half:
        hi += 1
    return max(axis[hi] - axis[lo], axis[1] - axis[0]) if hi > lo else axis[1] - axis[0]


def seed_two_mode(data, template, edge_fraction=0.15, prominence=0.1):
    """Start values for a cavity + magnon fit from the ridges of ``data``.

    Far-detuned columns give the flat cavity ridge and the sloped magnon
    ridge (its mean distance from ``GAMMA * B0`` seeds the offset); the narrowest ridge gap seeds
    ``g``; half-maximum widths seed the linewidths.
    """
    c, m = template.cavity_indices[0], template.magnon_indices[0]
    fields, omegas = data.field_axis, data.frequency_axis
    mag = data.magnitude
    peaks = spectrum_peaks(data, 2, min_prominence=prominence)
    n_edge = max(2, int(edge_fraction * fields.size))
    cav, mag_b, mag_w, cav_w = [], [], [], []
    for k in list(range(n_edge)) + list(range(fields.size - n_edge, fields.size)):
        p = peaks[k]
        if p.size < 2:
            continue
        low_side = k < n_edge
        cav_w_k, mag_w_k = (p[1], p[0]) if low_side else (p[0], p[1])
        cav.append(cav_w_k)
        mag_b.append(fields[k])
        mag_w.append(mag_w_k)
        j = int(np.searchsorted(omegas, cav_w_k))
        cav_w.append(_fwhm(omegas, mag[k], min(j, omegas.size - 1)))
    if len(cav) < 2:
        raise ValueError("map does not resolve both ridges away from the crossing")
    omega_c = float(np.median(cav))
    intercept = np.mean(np.asarray(mag_w) - GAMMA * np.asarray(mag_b))
    seps = [(p[1] - p[0], k) for k, p in enumerate(peaks) if p.size == 2]
    sep, k_min = min(seps)
    loading = template.loading
    gamma_c = max(float(np.median(cav_w)) - loading[c], 1e-3 * sep)
    j = int(np.searchsorted(omegas, peaks[k_min][0]))
    hybrid_w = _fwhm(omegas, mag[k_min], min(j, omegas.size - 1))
    gamma_m = max(2 * hybrid_w - gamma_c - loading[c], 1e-3 * sep)
    return {
        f"omega:{c}": omega_c,
        f"offset:{m}": float(intercept),
        f"g:{min(c, m)}-{max(c, m)}": float(sep / 2),
        f"gamma:{c}": float(gamma_c),
        f"gamma:{m}": float(gamma_m),
    }


# derived spin-system quantities ---------------------------------------------

# Collective coupling g = (GAMMA/2) * sqrt(MU_0 HBAR omega_c N_s fill / V): single-spin
# coupling to the photon's zero-point field sqrt(MU_0 HBAR omega_c / V), enhanced by sqrt(N_s).
SINGLE_SPIN_PREFACTOR = GAMMA / 2


def coupling_from_spins(N_s, omega_c, mode_volume, fill_factor=1.0):
    if not (N_s > 0 and omega_c > 0 and mode_volume > 0 and 0 < fill_factor <= 1):
        raise ValueError("arguments must be positive and fill factor in (0, 1]")
    return SINGLE_SPIN_PREFACTOR * math.sqrt(MU_0 * HBAR * omega_c * N_s * fill_factor
                                             / mode_volume)


def spins_from_coupling(g_cm, omega_c, mode_volume, fill_factor=1.0):
    """Number of spins implied by a measured coupling (inverse of the collective coupling law)."""
    if not (g_cm > 0 and omega_c > 0 and mode_volume > 0 and 0 < fill_factor <= 1):
        raise ValueError("arguments must be positive and fill factor in (0, 1]")
    return (g_cm / SINGLE_SPIN_PREFACTOR) ** 2 * mode_volume / (MU_0 * HBAR * omega_c
                                                                  * fill_factor)


def relaxation_time_from_fit(gamma_c, gamma_m, photon_weight=0.5):
    """Hybrid-mode energy lifetime ``1 / (w gamma_c + (1-w) gamma_m)``.

    ``photon_weight=0.5`` is full hybridisation, giving ``2/(gamma_c+gamma_m)``.
    """
    if gamma_c < 0 or gamma_m < 0 or not 0 <= photon_weight <= 1:
        raise ValueError("rates must be non-negative and weight in [0, 1]")
    rate = photon_weight * gamma_c + (1 - photon_weight) * gamma_m
    if not rate > 0:
        raise ValueError("weighted linewidth must be positive")
    return 1 / rate
