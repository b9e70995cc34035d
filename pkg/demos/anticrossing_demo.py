"""Anticrossing of a cavity mode and a Kittel magnon.

Sweeps the bias field through the crossing, prints the hybrid frequencies at
a few fields, and writes the |S21| map plus bare-mode overlays for gnuplot.
"""

import sys
from pathlib import Path

import numpy as np

from cmpmag.constants import TWO_PI
from cmpmag.hybrid import (HybridSystemModel, anticrossing_map, default_grids,
                           minimum_branch_separation, mode_pull_coefficient, rabi_splitting,
                           track_branches)
from cmpmag.plotdata import emit_plot_data

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)

# 10.7 GHz cavity, 100 MHz coupling, a few MHz of loss on each side
model = HybridSystemModel.pmhs(TWO_PI * 10.7e9, TWO_PI * 8e6, TWO_PI * 5e6, TWO_PI * 100e6,
                               kappas=(TWO_PI * 1e6, TWO_PI * 1e6))
print(f"crossing at B0 = {model.bias_field * 1e3:.3f} mT")
print(f"vacuum Rabi splitting: {rabi_splitting(model) / TWO_PI / 1e6:.2f} MHz")
print(f"strong coupling: {model.strong_coupling()[(0, 1)]}")

fields, omegas = default_grids(model, 201, 201)
for b, w in zip(fields[::50], track_branches(model, fields)[::50]):
    print(f"  B0 = {b:.5f} T  branches = {np.round(w.real / TWO_PI / 1e9, 4)} GHz")

# the mode-pull coefficient sets how strongly a field change moves each hybrid mode
print("mode pull at the crossing:", [round(mode_pull_coefficient(model, k), 4) for k in (0, 1)])

spec = anticrossing_map(model, fields, omegas)
print(f"closest approach of the ridges: {minimum_branch_separation(spec) / TWO_PI / 1e6:.1f} MHz")
spec.to_csv(out / "anticrossing.csv", out / "anticrossing_phase.csv")
for path in emit_plot_data(spec, out / "anticrossing", model=model):
    print("wrote", path)
