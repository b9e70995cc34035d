"""Noise densities and magnetometer sensitivity budgets."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .constants import GAMMA, HBAR, K_B, MU_B

TSM_FORMULA = "tsm"
LSM_FORMULA = "lsm"
LIMIT_FORMULA = "radiometer"

TSM_NOTES = (
    "valid only for a field with coherence time longer than T_s",
    "valid only for a field with coherence length covering all N_s spins",
)
LIMIT_NOTES = ("radiometer estimate: field limit scales as (bandwidth/time)**(1/4)",)


def noise_density(T_n):
    """Readout power noise per unit bandwidth, ``k_B * T_n`` (W/Hz)."""
    if not T_n > 0:
        raise ValueError(f"noise temperature must be positive, got {T_n!r}")
    return K_B * T_n


def quantum_limit_temperature(omega):
    """Noise temperature of a quantum-limited amplifier, ``hbar * omega / k_B``."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    return HBAR * omega / K_B


@dataclass(frozen=True)
class ReadoutChain:
    stages: tuple  # ((gain, noise_temperature_K), ...), first stage first
    physical_temperature: float = 0.0
    quantum_limit_included: bool = False

    def __post_init__(self):
        stages = tuple((float(g), float(t)) for g, t in self.stages)
        if not stages:
            raise ValueError("readout chain needs at least one stage")
        for g, t in stages:
            if not g > 0:
                raise ValueError("stage gains must be positive")
            if t < 0:
                raise ValueError("stage noise temperatures must be >= 0")
        if self.physical_temperature < 0:
            raise ValueError("physical temperature must be >= 0")
        object.__setattr__(self, "stages", stages)


def cascade_noise_temperature(chain):
    """Friis cascade ``T1 + T2/G1 + T3/(G1 G2) + ...``."""
    total, gain = 0.0, 1.0
    for g, t in chain.stages:
        total += t / gain
        gain *= g
    return total


def system_noise_temperature(chain, omega=None):
    """Cascade plus the source's physical temperature and, if flagged, the quantum limit."""
    total = cascade_noise_temperature(chain) + chain.physical_temperature
    if chain.quantum_limit_included:
        if omega is None:
            raise ValueError("quantum limit requested but no frequency given")
        total += quantum_limit_temperature(omega)
    return total


def tsm_sensitivity(sigma_P, N_s, omega1, T_s):
    """Transverse magnetometer field sensitivity (T/sqrt(Hz)).

    ``sqrt(sigma_P / (GAMMA * MU_B * N_s * omega1 * T_s))``: the field whose
    absorbed power equals the readout noise in 1 s.
    """
    if not (sigma_P > 0 and N_s > 0 and omega1 > 0 and T_s > 0):
        raise ValueError("all arguments must be positive")
    return math.sqrt(sigma_P / (GAMMA * MU_B * N_s * omega1 * T_s))


def lsm_sensitivity(B0, r, Q, sigma_P, pump_power, extra_noise_density=0.0):
    """Longitudinal magnetometer field sensitivity (T/sqrt(Hz)).

    ``2 B0 / (pi r Q) * sqrt(sigma / A_p**2)`` with ``sigma`` the readout
    noise plus any residual pump noise density.
    """
    if not 0 < r <= 1:
        raise ValueError("mode-pull coefficient must lie in (0, 1]")
    if not (B0 > 0 and Q > 0 and sigma_P > 0 and pump_power > 0) or extra_noise_density < 0:
        raise ValueError("B0, Q, sigma_P and pump power must be positive")
    sigma = sigma_P + extra_noise_density
    return 2 * B0 / (math.pi * r * Q) * math.sqrt(sigma / pump_power)


def integrated_field_limit(sigma_b, bandwidth, time):
    """Smallest detectable field after integrating ``time`` over ``bandwidth``.

    Power sensitivity improves as sqrt(bandwidth * time); the field goes as
    the square root of power, hence ``sigma_b * (bandwidth / time)**0.25``.
    """
    if not (sigma_b > 0 and bandwidth > 0 and time > 0):
        raise ValueError("arguments must be positive")
    if bandwidth * time < 1:
        raise ValueError("need bandwidth * time >= 1")
    return sigma_b * (bandwidth / time) ** 0.25


_FORMULAS = {
    TSM_FORMULA: (("sigma_P", "N_s", "omega1", "T_s"), tsm_sensitivity),
    LSM_FORMULA: (("B0", "r", "Q", "sigma_P", "pump_power", "extra_noise_density"),
                  lsm_sensitivity),
    LIMIT_FORMULA: (("sigma_b", "bandwidth", "time"), integrated_field_limit),
}

UNITS = {
    "sigma_P": "W/Hz", "N_s": "1", "omega1": "rad/s", "T_s": "s", "B0": "T", "r": "1",
    "Q": "1", "pump_power": "W", "extra_noise_density": "W/Hz", "sigma_b": "T/sqrt(Hz)",
    "bandwidth": "Hz", "time": "s", "loss_factor": "1",
}


@dataclass(frozen=True)
class SensitivityReport:
    formula: str
    inputs: dict
    sensitivity: float
    sigma_P: float | None = None
    loss_factor: float = 1.0
    notes: tuple = field(default=())

    @property
    def units(self):
        return "T" if self.formula == LIMIT_FORMULA else "T/sqrt(Hz)"

    def recompute(self):
        names, fn = _FORMULAS[self.formula]
        return self.loss_factor * fn(*(self.inputs[n] for n in names if n in self.inputs))

    def to_keyvalue(self):
        lines = [f"formula = {self.formula}", f"sensitivity = {self.sensitivity!r}",
                 f"units = {self.units}", f"loss_factor = {self.loss_factor!r}"]
        if self.sigma_P is not None:
            lines.append(f"sigma_P = {self.sigma_P!r}")
        for k, v in self.inputs.items():
            lines.append(f"input.{k} = {v!r}  # {UNITS.get(k, '')}")
        for note in self.notes:
            lines.append(f"note = {note}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_keyvalue(cls, text):
        inputs, notes, kw = {}, [], {}
        for raw in text.splitlines():
            if "=" not in raw:
                continue
            key, value = (s.strip() for s in raw.split("=", 1))
            if key.startswith("input."):
                inputs[key[6:]] = float(value.split("#")[0])
            elif key == "note":
                notes.append(value)
            elif key in ("sensitivity", "loss_factor", "sigma_P"):
                kw[key] = float(value)
            elif key == "formula":
                kw[key] = value
        return cls(inputs=inputs, notes=tuple(notes), **kw)


def tsm_report(sigma_P, N_s, omega1, T_s):
    inputs = {"sigma_P": sigma_P, "N_s": N_s, "omega1": omega1, "T_s": T_s}
    return SensitivityReport(TSM_FORMULA, inputs, tsm_sensitivity(**inputs), sigma_P,
                             notes=TSM_NOTES)


def lsm_report(B0, r, Q, sigma_P, pump_power, extra_noise_density=0.0, loss_factor=1.0):
    inputs = {"B0": B0, "r": r, "Q": Q, "sigma_P": sigma_P, "pump_power": pump_power,
              "extra_noise_density": extra_noise_density}
    value = loss_factor * lsm_sensitivity(**inputs)
    return SensitivityReport(LSM_FORMULA, inputs, value, sigma_P, loss_factor)


def limit_report(sigma_b, bandwidth, time):
    inputs = {"sigma_b": sigma_b, "bandwidth": bandwidth, "time": time}
    return SensitivityReport(LIMIT_FORMULA, inputs, integrated_field_limit(**inputs),
                             notes=LIMIT_NOTES)


_REPORTERS = {TSM_FORMULA: tsm_report, LSM_FORMULA: lsm_report, LIMIT_FORMULA: limit_report}


def sweep(formula, base, parameter, values):
    """Reports for ``formula`` with ``parameter`` stepped through ``values``."""
    make = _REPORTERS[formula]
    return [make(**dict(base, **{parameter: float(v)})) for v in values]


def write_sweep_csv(reports, path, parameter):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([parameter, "sensitivity", "formula"])
        for rep in reports:
            x = rep.inputs.get(parameter, getattr(rep, parameter, None))
            w.writerow([repr(x), repr(rep.sensitivity), rep.formula])
