"""Config-driven batch runs that write CSV, plot data and a digest manifest.

A run is described by one YAML mapping with a ``task`` key and task blocks.
External units are fixed: frequencies and rates in Hz, fields in T, times in
s, powers in W (or dBm where a ``_dbm`` key is used). Everything is
converted to rad/s on load.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import bloch, fitting, hybrid, sensitivity, sidebands
from .constants import GAMMA, TWO_PI
from .plotdata import emit_plot_data

TASKS = ("anticrossing", "bloch", "sidebands", "tsm-sensitivity", "lsm-sensitivity", "fit",
         "scan-limit")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

MANIFEST = "manifest.json"
_MISSING = object()


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    task: str
    params: dict
    out_dir: Path
    seed: int = 0
    force_overwrite: bool = False
    base_dir: Path = Path(".")


@dataclass
class RunOutcome:
    status: int
    manifest: list = field(default_factory=list)
    message: str = ""


def parse_config(mapping, out_dir, seed=None, force_overwrite=False, base_dir="."):
    if not isinstance(mapping, dict):
        raise ConfigError("config must be a mapping")
    task = mapping.get("task")
    if task not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}, got {task!r}")
    if seed is None:
        seed = mapping.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    if out_dir is None:
        out_dir = mapping.get("output_dir")
    if out_dir is None:
        raise ConfigError("no output directory given")
    return RunConfig(task, mapping, Path(out_dir), seed, force_overwrite, Path(base_dir))


def load_config(path, out_dir=None, seed=None, force_overwrite=False, task=None):
    path = Path(path)
    try:
        with open(path) as fh:
            mapping = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if task is not None and isinstance(mapping, dict):
        if mapping.setdefault("task", task) != task:
            raise ConfigError(f"config task {mapping['task']!r} does not match {task!r}")
    return parse_config(mapping, out_dir, seed, force_overwrite, path.parent)


# parameter helpers ---------------------------------------------------------

def _get(block, key, cast=float, default=_MISSING, where=""):
    if not isinstance(block, dict):
        raise ConfigError(f"{where or 'block'} must be a mapping")
    if key not in block:
        if default is _MISSING:
            raise ConfigError(f"missing {where + '.' if where else ''}{key}")
        return default
    try:
        return cast(block[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {where + '.' if where else ''}{key}: {exc}") from exc


def _block(params, key, required=True):
    blk = params.get(key)
    if blk is None:
        if required:
            raise ConfigError(f"missing block {key!r}")
        return {}
    if not isinstance(blk, dict):
        raise ConfigError(f"block {key!r} must be a mapping")
    return blk


def _model(params, key="model"):
    try:
        return hybrid.model_from_dict(_block(params, key))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _power(block, where):
    if "pump_power_w" in block:
        return _get(block, "pump_power_w", where=where)
    if "pump_power_dbm" in block:
        return sidebands.dbm_to_watts(_get(block, "pump_power_dbm", where=where))
    raise ConfigError(f"{where} needs pump_power_w or pump_power_dbm")


def _sigma_p(block, where, omega=None):
    if "sigma_p_w_per_hz" in block:
        return _get(block, "sigma_p_w_per_hz", where=where)
    if "t_n_k" in block:
        return sensitivity.noise_density(_get(block, "t_n_k", where=where))
    if "chain" in block:
        ch = block["chain"]
        chain = sensitivity.ReadoutChain(
            tuple(tuple(s) for s in _get(ch, "stages", list, where=where + ".chain")),
            _get(ch, "physical_temperature_k", default=0.0),
            _get(ch, "quantum_limit", bool, default=False))
        return sensitivity.noise_density(sensitivity.system_noise_temperature(chain, omega))
    raise ConfigError(f"{where} needs sigma_p_w_per_hz, t_n_k or chain")


def _ports(params):
    blk = _block(params, "ports", required=False)
    return _get(blk, "input", int, 0), _get(blk, "output", int, 1)


def _sweep_values(blk):
    if "values" in blk:
        return [float(v) for v in blk["values"]]
    start, stop = _get(blk, "start", where="sweep"), _get(blk, "stop", where="sweep")
    num = _get(blk, "num", int, 11, "sweep")
    if _get(blk, "log", bool, False):
        return list(np.geomspace(start, stop, num))
    return list(np.linspace(start, stop, num))


# tasks: each returns (compute, expected_filenames) ----------------------------

def _task_anticrossing(p, cfg):
    model = _model(p)
    pin, pout = _ports(p)
    grid = _block(p, "grid", required=False)
    if "field_t" in grid:
        lo, hi = grid["field_t"]
        flo, fhi = grid["freq_hz"]
        fields = np.linspace(lo, hi, _get(grid, "n_field", int, 201))
        omegas = TWO_PI * np.linspace(flo, fhi, _get(grid, "n_freq", int, 201))
    else:
        fields, omegas = hybrid.default_grids(model, _get(grid, "n_field", int, 201),
                                              _get(grid, "n_freq", int, 201),
                                              _get(grid, "span", default=5.0))

    def compute(out):
        spec = hybrid.anticrossing_map(model, fields, omegas, pin, pout)
        spec.to_csv(out / "spectrum.csv", out / "spectrum_phase.csv")
        branches = hybrid.track_branches(model, fields)
        with open(out / "branches.csv", "w") as fh:
            cols = [f"branch{i}_hz" for i in range(model.n_modes)]
            cols += [f"branch{i}_linewidth_hz" for i in range(model.n_modes)]
            fh.write(",".join(["field_T"] + cols) + "\n")
            for b, row in zip(fields, branches):
                vals = list(row.real / TWO_PI) + list(-2 * row.imag / TWO_PI)
                fh.write(",".join(repr(float(x)) for x in [b] + vals) + "\n")
        lines = [f"n_modes = {model.n_modes}"]
        for pair, strong in model.strong_coupling().items():
            lines.append(f"strong_coupling.{pair[0]}-{pair[1]} = {strong}")
        if model.cavity_indices and model.magnon_indices:
            lines.append(f"rabi_splitting_hz = {float(hybrid.rabi_splitting(model) / TWO_PI)!r}")
        lines.append(f"map_min_separation_hz = "
                     f"{float(hybrid.minimum_branch_separation(spec) / TWO_PI)!r}")
        (out / "summary.txt").write_text("\n".join(lines) + "\n")
        emit_plot_data(spec, out / "spectrum", model=model)

    return compute


def _bloch_params(blk):
    B0 = _get(blk, "B0_t", where="bloch")
    omega1 = TWO_PI * _get(blk, "drive_hz", where="bloch", default=GAMMA * B0 / TWO_PI)
    try:
        return bloch.BlochParameters(
            B0, _get(blk, "b1_t", where="bloch"), omega1, _get(blk, "T_s", where="bloch"),
            _get(blk, "n_s", default=2e28), _get(blk, "volume_m3", default=1e-9),
            polarization=_get(blk, "polarization", str, "linear"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _task_bloch(p, cfg):
    blk = _block(p, "bloch")
    params = _bloch_params(blk)
    duration = _get(blk, "duration_s", default=14 * params.T_s)
    w_fast = max(params.larmor, params.omega1)
    max_step = _get(blk, "max_step_s", default=0.9 * TWO_PI / (10 * w_fast))
    rtol = _get(blk, "rtol", default=1e-9)
    n_avg = _get(blk, "average_periods", int, 20)

    def compute(out):
        traj = bloch.integrate_bloch(params, duration, max_step, rtol=rtol)
        traj.to_csv(out / "trajectory.csv")
        emit_plot_data(traj, out / "trajectory")
        c = bloch.demodulate_transverse(traj, params.omega1, n_avg)
        amp, phase = bloch.steady_state_transverse(params)
        p_traj = bloch.drive_power(traj, params, n_avg)
        p_eq = bloch.absorbed_power(params.N_s, params.omega1, params.corotating_b1, params.T_s)
        lines = [f"linear_response = {params.linear_response}",
                 f"analytic_amplitude_A_per_m = {float(amp)!r}",
                 f"analytic_phase_rad = {float(phase)!r}",
                 f"simulated_amplitude_A_per_m = {float(abs(c))!r}",
                 f"simulated_phase_rad = {float(np.angle(c))!r}",
                 f"absorbed_power_formula_W = {float(p_eq)!r}",
                 f"absorbed_power_trajectory_W = {float(p_traj)!r}"]
        (out / "summary.txt").write_text("\n".join(lines) + "\n")

    return compute


def _task_sidebands(p, cfg):
    model = _model(p)
    blk = _block(p, "drive")
    pin, pout = _ports(p)
    modes = hybrid.hybrid_eigenmodes(model, loaded=True)
    if "pump_hz" in blk:
        pump = TWO_PI * _get(blk, "pump_hz", where="drive")
    else:
        branch = _get(blk, "pump_branch", str, "upper", "drive")
        if branch not in ("upper", "lower"):
            raise ConfigError("drive.pump_branch must be upper or lower")
        pump = modes[-1 if branch == "upper" else 0].real
    if blk.get("mod_hz") == "splitting" or "mod_hz" not in blk:
        if model.n_modes < 2:
            raise ConfigError("drive.mod_hz needed for a single-mode model")
        omega2 = modes[-1].real - modes[0].real
    else:
        omega2 = TWO_PI * _get(blk, "mod_hz", where="drive")
    try:
        drive = sidebands.ModulationDrive(_get(blk, "b2_t", where="drive"), omega2, pump,
                                          _power(blk, "drive"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    method = _get(p, "method", str, "harmonic-balance")
    if method not in ("harmonic-balance", "time-domain"):
        raise ConfigError("method must be harmonic-balance or time-domain")
    n_harm = _get(p, "n_harmonics", int, 8)
    filt = _block(p, "filter", required=False)

    def compute(out):
        if method == "time-domain":
            run_ = sidebands.simulate_modulated_pmhs(model, drive, input_port=pin,
                                                     output_port=pout)
        else:
            run_ = sidebands.harmonic_balance_sidebands(model, drive, n_harm, pin, pout)
        if filt:
            run_ = sidebands.waveguide_filter(
                run_, TWO_PI * _get(filt, "cutoff_hz", where="filter"),
                sidebands.db_to_power_ratio(_get(filt, "attenuation_db", where="filter")))
        run_.to_csv(out / "sidebands.csv")
        emit_plot_data(run_, out / "sidebands")
        lines = [f"method = {method}", f"pump_hz = {float(pump / TWO_PI)!r}",
                 f"mod_hz = {float(omega2 / TWO_PI)!r}",
                 f"carrier_power_W = {float(run_.carrier_power)!r}",
                 f"sideband_minus1_power_W = {float(run_.power(-1))!r}",
                 f"sideband_plus1_power_W = {float(run_.power(1))!r}"]
        (out / "summary.txt").write_text("\n".join(lines) + "\n")

    return compute


def _tsm_inputs(blk):
    omega1 = TWO_PI * _get(blk, "omega1_hz", where="tsm")
    return {"sigma_P": _sigma_p(blk, "tsm", omega1), "N_s": _get(blk, "N_s", where="tsm"),
            "omega1": omega1, "T_s": _get(blk, "T_s", where="tsm")}


def _lsm_inputs(p):
    blk = _block(p, "lsm")
    if "r" in blk:
        r = _get(blk, "r", where="lsm")
    elif "model" in p:
        model = _model(p)
        branch = _get(blk, "r_branch", int, -1, "lsm") % model.n_modes
        r = hybrid.mode_pull_coefficient(model, branch)
    else:
        r = 0.5
    return {"B0": _get(blk, "B0_t", where="lsm"), "r": r, "Q": _get(blk, "Q", where="lsm"),
            "sigma_P": _sigma_p(blk, "lsm"), "pump_power": _power(blk, "lsm"),
            "extra_noise_density": _get(blk, "extra_noise_density", default=0.0),
            "loss_factor": _get(blk, "loss_factor", default=1.0)}


def _report_task(make, inputs, p):
    try:
        report = make(**inputs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sw = _block(p, "sweep", required=False)
    parameter = sw.get("parameter") if sw else None
    if sw and parameter not in inputs:
        raise ConfigError(f"sweep.parameter must be one of {sorted(inputs)}")
    values = _sweep_values(sw) if sw else None

    def compute(out):
        (out / "report.txt").write_text(report.to_keyvalue())
        if sw:
            reps = [make(**dict(inputs, **{parameter: v})) for v in values]
            sensitivity.write_sweep_csv(reps, out / "sweep.csv", parameter)
            emit_plot_data(reps, out / "sweep", parameter=parameter,
                           unit=sensitivity.UNITS.get(parameter, ""))

    return compute


def _task_tsm(p, cfg):
    return _report_task(sensitivity.tsm_report, _tsm_inputs(_block(p, "tsm")), p)


def _task_lsm(p, cfg):
    return _report_task(sensitivity.lsm_report, _lsm_inputs(p), p)


def _task_scan_limit(p, cfg):
    blk = _block(p, "limit")
    if "sigma_b" in blk:
        sigma_b = _get(blk, "sigma_b", where="limit")
    else:
        sigma_b = sensitivity.tsm_sensitivity(**_tsm_inputs(_block(p, "tsm")))
    inputs = {"sigma_b": sigma_b, "bandwidth": _get(blk, "bandwidth_hz", where="limit"),
              "time": _get(blk, "time_s", where="limit")}
    return _report_task(sensitivity.limit_report, inputs, p)


def _rate_values(blk, where):
    out = {}
    for k, v in (blk or {}).items():
        try:
            out[k] = float(v) if k == "scale" else TWO_PI * float(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {where}.{k}") from exc
    return out


def _task_fit(p, cfg):
    template = _model(p)
    pin, pout = _ports(p)
    inputs = _block(p, "inputs", required=False)
    if "spectrum" in inputs:
        path = cfg.base_dir / inputs["spectrum"]
        if not path.is_file():
            raise ConfigError(f"input spectrum {path} not found")
        phase = cfg.base_dir / inputs["phase"] if "phase" in inputs else None
        if phase is not None and not phase.is_file():
            raise ConfigError(f"input phase file {phase} not found")
        data_source = ("file", path, phase)
    else:
        truth = _model(p, "truth")
        grid = _block(p, "grid", required=False)
        fields, omegas = hybrid.default_grids(truth, _get(grid, "n_field", int, 101),
                                              _get(grid, "n_freq", int, 101),
                                              _get(grid, "span", default=4.0))
        noise = _get(inputs, "noise", default=0.0)
        data_source = ("synthetic", truth, fields, omegas, noise)
    free = tuple(p.get("free") or fitting.pmhs_parameters(template))
    for name in free:
        try:
            fitting.get_parameter(template, name)
        except (KeyError, ValueError, IndexError) as exc:
            raise ConfigError(f"bad free parameter {name!r}: {exc}") from exc
    initial = _rate_values(p.get("initial_hz"), "initial_hz")
    bounds = {k: tuple(TWO_PI * float(x) if k != "scale" else float(x) for x in v)
              for k, v in (p.get("bounds_hz") or {}).items()}
    loss = _get(p, "loss", str, "log")
    use_seed = _get(p, "seed_from_ridges", bool, False)
    derived = _block(p, "derived", required=False)

    def compute(out):
        if data_source[0] == "file":
            data = hybrid.SpectrumMap.from_csv(data_source[1], data_source[2])
        else:
            _, truth, fields, omegas, noise = data_source
            clean = hybrid.anticrossing_map(truth, fields, omegas, pin, pout)
            rng = np.random.default_rng(cfg.seed)
            data = hybrid.SpectrumMap(fields, omegas, clean.magnitude
                                      * (1 + noise * rng.standard_normal(clean.values.shape)))
            data.to_csv(out / "data.csv")
        init = dict(initial)
        if use_seed:
            seeds = fitting.seed_two_mode(data, template)
            init = {**{k: v for k, v in seeds.items() if k in free}, **init}
        problem = fitting.FitProblem(data, template, free, init, bounds, loss, pin, pout)
        result = fitting.fit_anticrossing(problem)
        text = result.to_keyvalue()
        best = result.model
        c, m = best.cavity_indices[0], best.magnon_indices[0]
        t_s = fitting.relaxation_time_from_fit(best.modes[c].gamma, best.modes[m].gamma)
        text += f"T_s_s = {float(t_s)!r}\n"
        if "mode_volume_m3" in derived:
            n_s = fitting.spins_from_coupling(best.couplings[c, m], best.modes[c].omega,
                                              float(derived["mode_volume_m3"]),
                                              float(derived.get("fill_factor", 1.0)))
            text += f"N_s = {float(n_s)!r}\n"
        (out / "fit.txt").write_text(text)
        result.write_residual_csv(out / "residuals.csv", data)
        fitted = hybrid.anticrossing_map(best, data.field_axis, data.frequency_axis, pin, pout)
        fitted.to_csv(out / "fitted_spectrum.csv")

    return compute


_TASKS = {
    "anticrossing": _task_anticrossing,
    "bloch": _task_bloch,
    "sidebands": _task_sidebands,
    "tsm-sensitivity": _task_tsm,
    "lsm-sensitivity": _task_lsm,
    "fit": _task_fit,
    "scan-limit": _task_scan_limit,
}


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def verify_manifest(out_dir):
    """True if every file listed in the manifest still matches its digest."""
    out_dir = Path(out_dir)
    entries = json.loads((out_dir / MANIFEST).read_text())["files"]
    return all(_digest(out_dir / e["path"]) == e["sha256"] for e in entries)


def run(config):
    """Execute one task; returns a :class:`RunOutcome` with exit status and manifest."""
    try:
        compute = _TASKS[config.task](config.params, config)
    except ConfigError as exc:
        return RunOutcome(EXIT_CONFIG, message=f"config error: {exc}")

    out = config.out_dir
    if out.exists() and not out.is_dir():
        return RunOutcome(EXIT_IO, message=f"{out} exists and is not a directory")
    if out.exists() and any(out.iterdir()) and not config.force_overwrite:
        return RunOutcome(EXIT_IO, message=f"{out} is not empty; pass --force-overwrite")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return RunOutcome(EXIT_IO, message=f"cannot create {out}: {exc}")
    before = {p for p in out.iterdir()}

    try:
        with np.errstate(all="raise", under="ignore"):
            compute(out)
    except OSError as exc:
        return RunOutcome(EXIT_IO, message=f"I/O failure: {exc}")
    except ConfigError as exc:
        return RunOutcome(EXIT_CONFIG, message=f"config error: {exc}")
    except Exception as exc:  # numerical failures from any module
        return RunOutcome(EXIT_NUMERICAL, message=f"numerical failure: {type(exc).__name__}: {exc}")

    written = sorted(p for p in out.iterdir() if p.is_file() and p.name != MANIFEST
                     and (p not in before or config.force_overwrite))
    manifest = [{"path": p.name, "sha256": _digest(p), "bytes": p.stat().st_size}
                for p in written]
    try:
        (out / MANIFEST).write_text(json.dumps(
            {"task": config.task, "seed": config.seed, "files": manifest}, indent=2) + "\n")
    except OSError as exc:
        return RunOutcome(EXIT_IO, manifest, f"cannot write manifest: {exc}")
    return RunOutcome(EXIT_OK, manifest, f"{config.task}: wrote {len(manifest)} files")
