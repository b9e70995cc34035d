"""Sensitivity budgets for the two magnetometer schemes.

Reproduces the cryogenic longitudinal projection and the room-temperature
prototype estimate, then shows how a readout chain sets the noise density.
"""

from cmpmag.constants import TWO_PI
from cmpmag.sensitivity import (ReadoutChain, lsm_report, noise_density,
                                quantum_limit_temperature, sweep, system_noise_temperature)

projection = lsm_report(B0=0.4, r=0.5, Q=1e4, sigma_P=noise_density(300.0), pump_power=0.1)
print(f"projected LSM: {projection.sensitivity * 1e15:.2f} fT/rtHz")

prototype = lsm_report(B0=0.4, r=0.5, Q=2750, sigma_P=4e-21, pump_power=0.2e-3,
                       loss_factor=2.1)
print(f"prototype estimate: {prototype.sensitivity * 1e12:.2f} pT/rtHz (measured 2.0 +- 0.4)")

w = TWO_PI * 10.4e9
print(f"quantum limit at 10.4 GHz: {quantum_limit_temperature(w):.3f} K")
# HEMT at 4 K followed by a room-temperature amplifier
chain = ReadoutChain(stages=((1e3, 5.0), (1e2, 300.0)), physical_temperature=0.05,
                     quantum_limit_included=True)
t_sys = system_noise_temperature(chain, w)
print(f"system noise temperature: {t_sys:.2f} K -> {noise_density(t_sys):.3e} W/Hz")

for rep in sweep("lsm", dict(projection.inputs), "Q", [1e3, 1e4, 1e5]):
    print(f"  Q = {rep.inputs['Q']:8.0f}  sensitivity {rep.sensitivity:.3e} T/rtHz")
