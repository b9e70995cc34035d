"""Whitespace-separated data files with commented headers, ready for gnuplot."""

from __future__ import annotations

from functools import singledispatch
from pathlib import Path

import numpy as np

from .bloch import BlochTrajectory
from .constants import GAMMA, TWO_PI
from .hybrid import SpectrumMap
from .sidebands import ModulationRun


def _write(path, columns, header, blocks=None):
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("# " + "  ".join(header) + "\n")
        rows = np.column_stack(columns)
        for i, row in enumerate(rows):
            if blocks and i and i % blocks == 0:
                fh.write("\n")
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")
    return [path]


@singledispatch
def emit_plot_data(artifact, stem, **kwargs):
    """Write plot data for ``artifact`` next to ``stem``; returns the paths written."""
    raise TypeError(f"no plot format for {type(artifact).__name__}")


@emit_plot_data.register
def _(artifact: SpectrumMap, stem, model=None):
    stem = Path(stem)
    b, w = np.meshgrid(artifact.field_axis, artifact.frequency_axis / TWO_PI, indexing="ij")
    out = _write(stem.with_suffix(".dat"), [b.ravel(), w.ravel(), artifact.magnitude.ravel()],
                 ["field_T", "frequency_Hz", "abs_S21"], blocks=artifact.frequency_axis.size)
    if model is not None:
        fields = artifact.field_axis
        for i, mode in enumerate(model.modes):
            if mode.kind.value == "cavity":
                w_bare = np.full(fields.size, mode.omega)
            else:
                w_bare = GAMMA * fields + mode.field_offset
            out += _write(stem.parent / f"{stem.name}_bare_{mode.kind.value}{i}.dat",
                          [fields, w_bare / TWO_PI], ["field_T", "frequency_Hz"])
    return out


@emit_plot_data.register
def _(artifact: ModulationRun, stem):
    p = artifact.powers
    with np.errstate(divide="ignore"):
        dbc = 10 * np.log10(p / artifact.carrier_power)
    return _write(Path(stem).with_suffix(".dat"), [artifact.offsets / TWO_PI, dbc],
                  ["offset_Hz", "power_dBc"])


@emit_plot_data.register
def _(artifact: BlochTrajectory, stem):
    m = artifact.magnetization
    return _write(Path(stem).with_suffix(".dat"), [artifact.times, m[:, 0], m[:, 1], m[:, 2]],
                  ["t_s", "Mx_A_per_m", "My_A_per_m", "Mz_A_per_m"])


@emit_plot_data.register
def _(artifact: list, stem, parameter=None, unit=""):
    if parameter is None:
        raise ValueError("sweep plot data needs the swept parameter name")
    xs = [rep.inputs.get(parameter, getattr(rep, parameter, None)) for rep in artifact]
    ys = [rep.sensitivity for rep in artifact]
    label = f"{parameter}_{unit}" if unit else parameter
    return _write(Path(stem).with_suffix(".dat"), [xs, ys], [label, "sensitivity_T_per_rtHz"])
