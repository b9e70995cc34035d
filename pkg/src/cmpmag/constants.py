"""Physical constants used throughout the package (SI units)."""

from dataclasses import dataclass
import math


@dataclass(frozen=True)
class PhysicalConstants:
    gyromagnetic_ratio: float = 2 * math.pi * 28e9  # rad/s/T
    bohr_magneton: float = 9.274e-24  # J/T
    boltzmann: float = 1.3807e-23  # J/K
    reduced_planck: float = 1.0546e-34  # J s
    vacuum_permeability: float = 4e-7 * math.pi  # T m/A

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value!r}")


CONSTANTS = PhysicalConstants()

GAMMA = CONSTANTS.gyromagnetic_ratio
MU_B = CONSTANTS.bohr_magneton
K_B = CONSTANTS.boltzmann
HBAR = CONSTANTS.reduced_planck
MU_0 = CONSTANTS.vacuum_permeability
TWO_PI = 2 * math.pi
