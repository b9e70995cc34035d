"""Photon-magnon hybrid systems as coupled damped oscillators.

All rates are angular (rad/s). A mode's ``gamma`` is its full width at half
maximum in energy, so an isolated mode has the complex eigenfrequency
``omega - 1j * gamma / 2``. The coupled-mode equations are written in the
rotating-wave form

    da/dt = -1j * M @ a + sqrt(kappa_in) * s_in

with ``M`` the complex-symmetric dynamical matrix returned by
:func:`dynamical_matrix`. Ports add external damping ``kappa`` to the mode
they are attached to; :func:`s21` and :func:`anticrossing_map` use the loaded
matrix.
"""

from __future__ import annotations

import csv
import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize_scalar
from scipy.signal import find_peaks

from .constants import GAMMA, TWO_PI

THREADS_ENV = "CMPMAG_THREADS"


class EigenSolverError(RuntimeError):
    """The dense eigenvalue solver failed to converge."""


class BranchTrackingError(RuntimeError):
    """A hybrid branch could not be followed unambiguously across fields."""


class ScanBoundaryError(RuntimeError):
    """A minimum search ended on the edge of its scan window."""


class SpectrumError(ArithmeticError):
    """Non-finite transmission at a specific grid point."""

    def __init__(self, message, field_t=None, omega=None):
        super().__init__(message)
        self.field_t = field_t
        self.omega = omega


class ModeKind(str, enum.Enum):
    CAVITY = "cavity"
    MAGNON = "magnon"


def kittel_frequency(bias_field, field_offset=0.0):
    """Angular frequency of the uniform precession mode, ``GAMMA * B0 + offset``."""
    b = np.asarray(bias_field, dtype=float)
    if np.any(b < 0):
        raise ValueError(f"bias field must be non-negative, got {bias_field!r}")
    out = GAMMA * b + field_offset
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OscillatorMode:
    kind: ModeKind
    omega: float
    gamma: float
    field_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModeKind(self.kind))
        if self.gamma < 0 or not np.isfinite(self.gamma):
            raise ValueError(f"damping rate must be >= 0, got {self.gamma!r}")
        if self.kind is ModeKind.CAVITY:
            if not self.omega > 0:
                raise ValueError(f"cavity frequency must be > 0, got {self.omega!r}")
            if self.field_offset != 0:
                raise ValueError("field_offset only applies to magnon modes")
        elif self.omega < 0:
            raise ValueError(f"magnon frequency must be >= 0, got {self.omega!r}")

    @classmethod
    def cavity(cls, omega, gamma):
        return cls(ModeKind.CAVITY, omega, gamma)

    @classmethod
    def magnon(cls, gamma, field_offset=0.0, bias_field=0.0):
        return cls(ModeKind.MAGNON, kittel_frequency(bias_field, field_offset), gamma, field_offset)


@dataclass(frozen=True)
class Port:
    """External line attached to one mode with energy coupling rate ``kappa``."""

    mode: int
    kappa: float

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError(f"port coupling must be >= 0, got {self.kappa!r}")


@dataclass(frozen=True, eq=False)
class HybridSystemModel:
    """Ordered oscillator modes, their couplings, the bias field and the ports.

    Magnon frequencies are slaved to ``bias_field``: whatever ``omega`` a
    magnon mode carries on input is replaced by ``GAMMA * bias_field +
    field_offset``.
    """

    modes: tuple
    couplings: np.ndarray
    bias_field: float = 0.0
    ports: tuple = ()

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise ValueError("model needs at least one mode")
        if self.bias_field < 0:
            raise ValueError(f"bias field must be non-negative, got {self.bias_field!r}")
        modes = tuple(
            replace(m, omega=kittel_frequency(self.bias_field, m.field_offset))
            if m.kind is ModeKind.MAGNON else m
            for m in modes
        )
        g = np.array(self.couplings, dtype=float, copy=True).reshape(len(modes), len(modes))
        if not np.all(np.isfinite(g)):
            raise ValueError("couplings must be finite")
        if np.any(g < 0):
            raise ValueError("couplings must be non-negative")
        if np.any(np.diag(g) != 0):
            raise ValueError("coupling matrix must have a zero diagonal")
        if not np.array_equal(g, g.T):
            raise ValueError("coupling matrix must be symmetric")
        g.setflags(write=False)
        ports = tuple(p if isinstance(p, Port) else Port(*p) for p in self.ports)
        for p in ports:
            if not 0 <= p.mode < len(modes):
                raise ValueError(f"port attached to unknown mode {p.mode}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "couplings", g)
        object.__setattr__(self, "ports", ports)

    @classmethod
    def pmhs(cls, omega_c, gamma_c, gamma_m, g, bias_field=None, field_offset=0.0, kappas=()):
        """Two-mode cavity + magnon system.

        ``bias_field=None`` tunes the magnon onto the cavity. ``kappas`` lists
        the coupling rates of ports attached to the cavity.
        """
        if bias_field is None:
            bias_field = (omega_c - field_offset) / GAMMA
        modes = (OscillatorMode.cavity(omega_c, gamma_c),
                 OscillatorMode.magnon(gamma_m, field_offset, bias_field))
        return cls(modes, [[0.0, g], [g, 0.0]], bias_field, tuple(Port(0, k) for k in kappas))

    @property
    def n_modes(self):
        return len(self.modes)

    @property
    def omegas(self):
        return np.array([m.omega for m in self.modes])

    @property
    def gammas(self):
        return np.array([m.gamma for m in self.modes])

    @property
    def cavity_indices(self):
        return [i for i, m in enumerate(self.modes) if m.kind is ModeKind.CAVITY]

    @property
    def magnon_indices(self):
        return [i for i, m in enumerate(self.modes) if m.kind is ModeKind.MAGNON]

    @property
    def loading(self):
        """External damping per mode contributed by the ports."""
        out = np.zeros(self.n_modes)
        for p in self.ports:
            out[p.mode] += p.kappa
        return out

    def with_bias_field(self, bias_field):
        return replace(self, bias_field=float(bias_field))

    def crossing_field(self, cavity=None, magnon=None):
        """Bias field at which ``magnon`` is degenerate with ``cavity``."""
        cavity = self.cavity_indices[0] if cavity is None else cavity
        magnon = self.magnon_indices[0] if magnon is None else magnon
        return (self.modes[cavity].omega - self.modes[magnon].field_offset) / GAMMA

    def strong_coupling(self):
        """``{(i, j): g_ij > max(gamma_i, gamma_j) / 2}`` for every coupled pair."""
        out = {}
        for i in range(self.n_modes):
            for j in range(i + 1, self.n_modes):
                if self.couplings[i, j] > 0:
                    gi, gj = self.modes[i].gamma, self.modes[j].gamma
                    out[(i, j)] = bool(self.couplings[i, j] > max(gi, gj) / 2)
        return out

    def submodel(self, indices):
        idx = list(indices)
        remap = {old: new for new, old in enumerate(idx)}
        return HybridSystemModel(
            tuple(self.modes[i] for i in idx),
            self.couplings[np.ix_(idx, idx)],
            self.bias_field,
            tuple(Port(remap[p.mode], p.kappa) for p in self.ports if p.mode in remap),
        )


def dynamical_matrix(model, loaded=False):
    """Complex-symmetric matrix with ``omega_j - 1j*gamma_j/2`` on the diagonal.

    With ``loaded=True`` the port couplings are added to the mode damping.
    """
    gamma = model.gammas + (model.loading if loaded else 0.0)
    m = model.couplings.astype(complex)
    m[np.diag_indices(model.n_modes)] = model.omegas - 0.5j * gamma
    return m


def _eig(matrix):
    try:
        vals, vecs = np.linalg.eig(matrix)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc
    order = np.argsort(vals.real, kind="stable")
    vecs = vecs[:, order]
    return vals[order], vecs / np.linalg.norm(vecs, axis=0)


def hybrid_eigenmodes(model, loaded=False):
    """Complex hybrid frequencies sorted by real part.

    Real part is the mode frequency; ``-2 * imag`` is its linewidth.
    """
    return _eig(dynamical_matrix(model, loaded))[0]


def track_branches(model, field_grid, loaded=False):
    """Eigenfrequencies over a field sweep with consistent branch labels.

    Branches are labelled by real-part order at the first field and followed
    by maximum eigenvector overlap between neighbouring fields.
    Returns an array of shape ``(len(field_grid), n_modes)``.
    """
    fields = np.asarray(field_grid, dtype=float)
    out = np.empty((fields.size, model.n_modes), dtype=complex)
    prev = None
    for k, b in enumerate(fields):
        vals, vecs = _eig(dynamical_matrix(model.with_bias_field(b), loaded))
        if prev is not None:
            overlap = np.abs(prev.conj().T @ vecs)
            rows, cols = linear_sum_assignment(-overlap)
            vals, vecs = vals[cols], vecs[:, cols]
        out[k] = vals
        prev = vecs
    return out


def _field_window(model, cavity, magnon, half_width):
    centre = model.crossing_field(cavity, magnon)
    if half_width is None:
        sub = model.submodel([cavity, magnon])
        scale = max(sub.couplings[0, 1], *sub.gammas, 1e-9 * sub.modes[0].omega)
        half_width = 5 * scale / GAMMA
    lo = max(centre - half_width, 0.0)
    return lo, centre + half_width


def rabi_splitting(model, pair=None, half_width=None):
    """Minimum over bias field of the hybrid frequency separation of a mode pair.

    ``pair`` is ``(cavity_index, magnon_index)``; by default the first cavity
    and first magnon. The search window is centred on the bare crossing with
    ``half_width`` in Tesla (default: five coupling/linewidth scales).
    """
    if pair is None:
        if not model.cavity_indices or not model.magnon_indices:
            raise ValueError("need one cavity and one magnon mode")
        pair = (model.cavity_indices[0], model.magnon_indices[0])
    sub = model.submodel(pair)
    lo, hi = _field_window(model, pair[0], pair[1], half_width)

    def separation(x):
        vals = hybrid_eigenmodes(sub.with_bias_field(lo + x * (hi - lo)))
        return vals[1].real - vals[0].real

    res = minimize_scalar(separation, bounds=(0.0, 1.0), method="bounded",
                          options={"xatol": 1e-12})
    if res.x < 1e-6 or res.x > 1 - 1e-6:
        raise ScanBoundaryError(
            f"splitting minimum on scan boundary at B0={lo + res.x * (hi - lo):.6g} T")
    return float(max(res.fun, 0.0))


def mode_pull_coefficient(model, branch, bias_field=None, tol=1e-3, rel_step=1e-4):
    """Slope of a hybrid branch with bias field in units of ``GAMMA``.

    ``branch`` indexes the eigenmodes sorted by real part at ``bias_field``.
    Central difference with a step of ``rel_step`` times the largest coupling
    or linewidth; neighbours are matched by eigenvector overlap so the slope
    follows the branch through near-degeneracies.
    """
    b0 = model.bias_field if bias_field is None else float(bias_field)
    scale = max(model.couplings.max(), model.gammas.max())
    if scale == 0:
        scale = 1e-9 * max(model.omegas.max(), GAMMA * 1e-3)
    h = rel_step * scale / GAMMA
    if b0 - h < 0:
        raise ValueError("bias field too close to zero for a central difference")

    vals0, vecs0 = _eig(dynamical_matrix(model.with_bias_field(b0)))
    v0 = vecs0[:, branch]
    neighbours = []
    for b in (b0 - h, b0 + h):
        vals, vecs = _eig(dynamical_matrix(model.with_bias_field(b)))
        overlap = np.abs(v0.conj() @ vecs)
        k = int(np.argmax(overlap))
        if overlap[k] < 0.9:
            raise BranchTrackingError(
                f"branch {branch} lost at B0={b:.9g} T (best overlap {overlap[k]:.3f})")
        neighbours.append(vals[k].real)
    r = (neighbours[1] - neighbours[0]) / (2 * h * GAMMA)
    if r < -tol or r > 1 + tol:
        raise ValueError(f"mode-pull coefficient {r:.6g} outside [0, 1]")
    return float(min(max(r, 0.0), 1.0))


def _check_transmission_ports(model, input_port, output_port):
    pin, pout = model.ports[input_port], model.ports[output_port]
    if not (pin.kappa > 0 and pout.kappa > 0):
        raise ValueError("transmission needs positive coupling on both ports")
    if np.any(model.gammas + model.loading <= 0):
        raise ValueError("transmission synthesis needs every mode damped (gamma > 0)")
    return pin, pout


def _transmission(m_dyn, omegas, pin, pout):
    n = m_dyn.shape[-1]
    eye = np.eye(n)
    a = 1j * (omegas[..., None, None] * eye - m_dyn)
    rhs = np.zeros(a.shape[:-1] + (1,), dtype=complex)
    rhs[..., pin.mode, 0] = 1.0
    x = np.linalg.solve(a, rhs)[..., 0]
    return np.sqrt(pin.kappa * pout.kappa) * x[..., pout.mode]


def s21(model, probe_omega, input_port=0, output_port=1):
    """Complex transmission from ``input_port`` to ``output_port``.

    ``S21 = sqrt(kappa_in * kappa_out) * [(1j * (w - M))^-1][out, in]``
    with ``M`` the loaded dynamical matrix. Accepts scalar or array probes.
    """
    pin, pout = _check_transmission_ports(model, input_port, output_port)
    w = np.asarray(probe_omega, dtype=float)
    out = _transmission(dynamical_matrix(model, loaded=True), w.reshape(-1), pin, pout)
    return complex(out[0]) if w.ndim == 0 else out.reshape(w.shape)


@dataclass(frozen=True, eq=False)
class SpectrumMap:
    """Complex transmission over a (bias field, probe frequency) grid.

    ``values[i, j]`` belongs to ``field_axis[i]`` and ``frequency_axis[j]``
    (rad/s).
    """

    field_axis: np.ndarray
    frequency_axis: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        fa = np.array(self.field_axis, dtype=float)
        wa = np.array(self.frequency_axis, dtype=float)
        v = np.array(self.values)
        for name, ax in (("field", fa), ("frequency", wa)):
            if ax.ndim != 1 or ax.size == 0 or np.any(np.diff(ax) <= 0):
                raise ValueError(f"{name} axis must be non-empty and strictly increasing")
        if v.shape != (fa.size, wa.size):
            raise ValueError(f"values shape {v.shape} does not match axes {(fa.size, wa.size)}")
        if not np.all(np.isfinite(v)):
            raise ValueError("spectrum values must be finite")
        for arr in (fa, wa, v):
            arr.setflags(write=False)
        object.__setattr__(self, "field_axis", fa)
        object.__setattr__(self, "frequency_axis", wa)
        object.__setattr__(self, "values", v)

    @property
    def magnitude(self):
        return np.abs(self.values)

    @property
    def frequency_step(self):
        return float(np.min(np.diff(self.frequency_axis)))

    def to_csv(self, path, phase_path=None):
        """Write ``|S21|`` (linear); frequencies in Hz in the header row."""
        _write_grid(path, self.field_axis, self.frequency_axis, self.magnitude)
        if phase_path is not None:
            _write_grid(phase_path, self.field_axis, self.frequency_axis, np.angle(self.values))

    @classmethod
    def from_csv(cls, path, phase_path=None):
        fields, omegas, mag = _read_grid(path)
        values = mag.astype(complex)
        if phase_path is not None:
            f2, w2, phase = _read_grid(phase_path)
            if not (np.array_equal(f2, fields) and np.array_equal(w2, omegas)):
                raise ValueError("phase file axes differ from magnitude file")
            values = mag * np.exp(1j * phase)
        return cls(fields, omegas, values)


_CORNER = "field_T\\frequency_Hz"


def _write_grid(path, fields, omegas, cells):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([_CORNER] + [repr(float(x)) for x in omegas / TWO_PI])
        for b, row in zip(fields, cells):
            w.writerow([repr(float(b))] + [repr(float(x)) for x in row])


def _read_grid(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2 or len(rows[0]) < 2:
        raise ValueError(f"{path}: not a spectrum grid")
    freqs_hz = np.array(rows[0][1:], dtype=float)
    body = np.array([r for r in rows[1:]], dtype=float)
    if body.shape[1] != freqs_hz.size + 1:
        raise ValueError(f"{path}: ragged rows")
    return body[:, 0], freqs_hz * TWO_PI, body[:, 1:]


def default_grids(model, n_field=201, n_freq=201, span=5.0, pair=None):
    """Field and frequency grids spanning ``span`` couplings around the crossing."""
    if pair is None:
        pair = (model.cavity_indices[0], model.magnon_indices[0])
    g = model.couplings[pair]
    scale = g if g > 0 else max(model.gammas[list(pair)].max(), 1e-4 * model.modes[pair[0]].omega)
    b_c = model.crossing_field(*pair)
    w_c = model.modes[pair[0]].omega
    fields = b_c + np.linspace(-span, span, n_field) * scale / GAMMA
    omegas = w_c + np.linspace(-span, span, n_freq) * scale
    return fields, omegas


def _default_workers():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def anticrossing_map(model, field_grid, frequency_grid, input_port=0, output_port=1,
                     workers=None):
    """Transmission map with magnon frequencies recomputed at every field.

    Field rows are independent, so they may be split over ``workers`` threads
    (default from ``$CMPMAG_THREADS``).
    """
    fields = np.asarray(field_grid, dtype=float)
    omegas = np.asarray(frequency_grid, dtype=float)
    if np.any(fields < 0):
        raise ValueError("bias fields must be non-negative")
    pin, pout = _check_transmission_ports(model, input_port, output_port)
    base = dynamical_matrix(model, loaded=True)
    mag = model.magnon_indices
    offsets = np.array([model.modes[i].field_offset for i in mag])
    m_all = np.broadcast_to(base, (fields.size,) + base.shape).copy()
    gam = base[mag, mag].imag
    m_all[:, mag, mag] = (GAMMA * fields[:, None] + offsets) + 1j * gam

    def rows(sl):
        return _transmission(m_all[sl][:, None], omegas[None, :], pin, pout)

    workers = _default_workers() if workers is None else workers
    chunks = [slice(a[0], a[-1] + 1) for a in np.array_split(np.arange(fields.size), workers)
              if a.size]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(rows, chunks))
    else:
        parts = [rows(c) for c in chunks]
    values = np.concatenate(parts, axis=0)
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        i, j = bad[0]
        raise SpectrumError(f"non-finite S21 at B0={fields[i]!r} T, omega={omegas[j]!r} rad/s",
                            fields[i], omegas[j])
    return SpectrumMap(fields, omegas, values)


def _refine_peak(axis, row, i):
    # 1/|S|^2 of a Lorentzian is an exact parabola in frequency
    y = 1.0 / row[i - 1:i + 2] ** 2
    denom = y[0] - 2 * y[1] + y[2]
    if not denom > 0:
        return axis[i]
    shift = 0.5 * (y[0] - y[2]) / denom
    return axis[i] + float(np.clip(shift, -0.5, 0.5)) * (axis[i + 1] - axis[i])


def spectrum_peaks(spectrum, n_peaks=None, refine=True, min_prominence=0.0):
    """Local maxima of ``|S21|`` in each field column, sorted by frequency.

    ``n_peaks`` keeps only the tallest ones. Returns a list of arrays of
    frequencies (rad/s), one per field. Samples on the window edge are never
    peaks, so a ridge running out of the window is simply absent. With
    ``refine`` each peak is moved to the vertex of a three-point Lorentzian
    through its neighbours. ``min_prominence`` (a fraction of the column
    maximum) discards noise ripples.
    """
    axis = spectrum.frequency_axis
    out = []
    for row in spectrum.magnitude:
        idx, _ = find_peaks(row, prominence=min_prominence * row.max() or None)
        if n_peaks is not None and idx.size > n_peaks:
            idx = idx[np.argsort(row[idx])[::-1][:n_peaks]]
        locs = [_refine_peak(axis, row, i) if refine else axis[i] for i in idx]
        out.append(np.sort(np.asarray(locs, dtype=float)))
    return out


def minimum_branch_separation(spectrum):
    """Smallest distance between the two tallest ridges over all fields.

    Only columns with two resolved peaks contribute; a map with none returns 0.
    """
    seps = [p[1] - p[0] for p in spectrum_peaks(spectrum, 2) if p.size == 2]
    return float(min(seps)) if seps else 0.0


# config I/O ---------------------------------------------------------------

def model_from_dict(cfg):
    """Build a model from a config mapping with frequencies in Hz."""
    try:
        bias = float(cfg["bias_field_t"])
        modes = []
        for m in cfg["modes"]:
            kind = ModeKind(m["kind"])
            gamma = TWO_PI * float(m.get("gamma_hz", 0.0))
            if kind is ModeKind.CAVITY:
                modes.append(OscillatorMode.cavity(TWO_PI * float(m["omega_hz"]), gamma))
            else:
                if "field_offset_hz" in m:
                    offset = TWO_PI * float(m["field_offset_hz"])
                elif "omega_hz" in m:
                    offset = TWO_PI * float(m["omega_hz"]) - GAMMA * bias
                else:
                    offset = 0.0
                modes.append(OscillatorMode.magnon(gamma, offset, bias))
        n = len(modes)
        g = np.zeros((n, n))
        if "couplings_hz" in cfg:
            g = TWO_PI * np.array(cfg["couplings_hz"], dtype=float)
        ports = tuple(Port(int(p["mode"]), TWO_PI * float(p["kappa_hz"]))
                      for p in cfg.get("ports", ()))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"bad model config: missing or malformed {exc}") from exc
    return HybridSystemModel(tuple(modes), g, bias, ports)


def model_to_dict(model):
    modes = []
    for m in model.modes:
        d = {"kind": m.kind.value, "gamma_hz": m.gamma / TWO_PI}
        if m.kind is ModeKind.CAVITY:
            d["omega_hz"] = m.omega / TWO_PI
        else:
            d["field_offset_hz"] = m.field_offset / TWO_PI
        modes.append(d)
    return {
        "bias_field_t": model.bias_field,
        "modes": modes,
        "couplings_hz": (model.couplings / TWO_PI).tolist(),
        "ports": [{"mode": p.mode, "kappa_hz": p.kappa / TWO_PI} for p in model.ports],
    }


def load_model(path):
    import yaml

    with open(path) as fh:
        cfg = yaml.safe_load(fh)
    return model_from_dict(cfg.get("model", cfg))


def save_model(model, path):
    import yaml

    with open(path, "w") as fh:
        yaml.safe_dump({"model": model_to_dict(model)}, fh, sort_keys=False)
