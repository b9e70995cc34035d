"""Transverse magnetometer: from the Bloch equations to a field sensitivity.

A weak resonant field drives the magnetization. The integrated trajectory
gives the absorbed power, which matches the closed form. Equating that power
to the readout noise yields the transverse sensitivity.
"""

from cmpmag.bloch import (BlochParameters, absorbed_power, demodulate_transverse,
                          drive_power, integrate_bloch, steady_state_transverse)
from cmpmag.constants import GAMMA, TWO_PI
from cmpmag.sensitivity import integrated_field_limit, noise_density, tsm_report

# low field keeps the Larmor period long enough to integrate quickly
params = BlochParameters(B0=0.01, b1=1e-3 / (GAMMA * 1e-7), omega1=GAMMA * 0.01, T_s=1e-7)
traj = integrate_bloch(params, 14 * params.T_s, 0.99 * TWO_PI / (10 * params.larmor))
amp, phase = steady_state_transverse(params)
c = demodulate_transverse(traj, params.omega1)
print(f"transverse amplitude: simulated {abs(c):.6e}  analytic {amp:.6e} A/m")

p_sim = drive_power(traj, params)
p_formula = absorbed_power(params.N_s, params.omega1, params.corotating_b1, params.T_s)
print(f"absorbed power: trajectory {p_sim:.6e}  formula {p_formula:.6e} W")

# the 10-sphere system at 10.4 GHz with a 1 K readout
report = tsm_report(noise_density(1.0), 1e21, TWO_PI * 10.4e9, 168e-9)
print(report.to_keyvalue())
limit = integrated_field_limit(report.sensitivity, 5e3, 3.6e4)
print(f"after 10 h over 5 kHz: {limit:.3e} T")
