import numpy as np
import pytest

from cmpmag import hybrid
from cmpmag.constants import GAMMA, TWO_PI
from cmpmag.hybrid import (HybridSystemModel, OscillatorMode, Port, SpectrumMap,
                           anticrossing_map, default_grids, dynamical_matrix,
                           hybrid_eigenmodes, minimum_branch_separation, mode_pull_coefficient,
                           rabi_splitting, s21, spectrum_peaks, track_branches)

from conftest import G, OMEGA_C, pmhs


def two_mode_oracle(wc, wm, gc, gm, g):
    # closed-form eigenvalues of the 2x2 complex-symmetric matrix
    mean = 0.5 * (wc + wm) - 0.25j * (gc + gm)
    half = 0.5 * (wc - wm) - 0.25j * (gc - gm)
    root = np.sqrt(half ** 2 + g ** 2)
    return np.sort_complex(np.array([mean - root, mean + root]))


def test_kittel_frequency_linear_in_field():
    assert hybrid.kittel_frequency(0.5) == pytest.approx(GAMMA * 0.5)
    assert hybrid.kittel_frequency(0.5, 1e9) == pytest.approx(GAMMA * 0.5 + 1e9)
    with pytest.raises(ValueError):
        hybrid.kittel_frequency(-0.1)


def test_degenerate_eigenmodes_split_by_two_g():
    m = pmhs(gamma_c=TWO_PI * 1e6, gamma_m=TWO_PI * 1e6, kappa=0.0) if False else \
        HybridSystemModel.pmhs(OMEGA_C, TWO_PI * 1e6, TWO_PI * 1e6, G, bias_field=OMEGA_C / GAMMA)
    w = hybrid_eigenmodes(m)
    assert w.real / TWO_PI == pytest.approx([10.6e9, 10.8e9], rel=1e-9)
    assert rabi_splitting(m) / TWO_PI == pytest.approx(200e6, rel=1e-6)


@pytest.mark.parametrize("detuning", [0.0, 3e8, -7e8, 2e9])
def test_eigenmodes_match_closed_form(detuning):
    m = pmhs(detuning=detuning)
    wm = m.omegas[1]
    expect = two_mode_oracle(OMEGA_C, wm, m.gammas[0], m.gammas[1], G)
    assert np.allclose(hybrid_eigenmodes(m), expect, rtol=1e-12)


def test_loaded_eigenmodes_include_port_damping(model):
    loaded = hybrid_eigenmodes(model, loaded=True)
    bare = hybrid_eigenmodes(model)
    extra = model.loading[0]
    # trace is linear in the damping
    assert np.sum(loaded).imag == pytest.approx(np.sum(bare).imag - extra / 2, rel=1e-12)


def test_matrix_is_complex_symmetric(model):
    m = dynamical_matrix(model, loaded=True)
    assert np.allclose(m, m.T)
    assert np.trace(m) == pytest.approx(np.sum(hybrid_eigenmodes(model, loaded=True)), rel=1e-12)


def test_magnon_follows_bias_field(model):
    moved = model.with_bias_field(model.bias_field + 0.01)
    assert moved.omegas[1] - model.omegas[1] == pytest.approx(GAMMA * 0.01, rel=1e-9)
    assert moved.omegas[0] == model.omegas[0]


def test_strong_coupling_flag():
    assert pmhs().strong_coupling()[(0, 1)]
    assert not pmhs(g=TWO_PI * 1e6).strong_coupling()[(0, 1)]


def test_mode_pull_half_at_degeneracy(model):
    r = [mode_pull_coefficient(model, b) for b in (0, 1)]
    assert r == pytest.approx([0.5, 0.5], abs=1e-4)
    assert sum(r) == pytest.approx(1.0, abs=1e-6)


def test_mode_pull_uncoupled_is_zero_or_one():
    m = pmhs(g=0.0, detuning=TWO_PI * 1e9)
    r = sorted(mode_pull_coefficient(m, b) for b in (0, 1))
    assert r == pytest.approx([0.0, 1.0], abs=1e-6)


def test_mode_pull_far_detuned():
    m = pmhs(detuning=10 * G)
    # magnon-like upper branch: oracle from the closed-form 2x2 derivative
    d = 10 * G
    r_oracle = 0.5 * (1 + d / np.hypot(d, 2 * G))
    assert mode_pull_coefficient(m, 1) == pytest.approx(r_oracle, abs=2e-4)


def test_single_mode_two_ports_half_transmission():
    gamma = TWO_PI * 2e6
    m = HybridSystemModel((OscillatorMode.cavity(OMEGA_C, gamma),), np.zeros((1, 1)), 0.0,
                          (Port(0, gamma / 2), Port(0, gamma / 2)))
    assert abs(s21(m, OMEGA_C)) == pytest.approx(0.5, rel=1e-12)
    # Lorentzian half power at half the loaded linewidth
    assert abs(s21(m, OMEGA_C + gamma)) ** 2 == pytest.approx(0.125, rel=1e-9)


def test_s21_rejects_portless_model():
    m = HybridSystemModel.pmhs(OMEGA_C, 1e6, 1e6, G, bias_field=0.38)
    with pytest.raises((ValueError, IndexError)):
        s21(m, OMEGA_C)


def test_map_ridges_follow_eigenmodes(model):
    fields, omegas = default_grids(model)
    spec = anticrossing_map(model, fields, omegas)
    step = omegas[1] - omegas[0]
    assert minimum_branch_separation(spec) == pytest.approx(2 * G, abs=step)
    peaks = spectrum_peaks(spec, 2)
    branches = track_branches(model, fields, loaded=True)
    checked = 0
    for k, p in enumerate(peaks):
        if p.size == 2:
            assert np.all(np.abs(p - np.sort(branches[k].real)) <= step / 2 + 1e-6 * step)
            checked += 1
    assert checked > fields.size // 2


def test_uncoupled_map_ridges_are_bare_lines():
    m = pmhs(g=0.0)
    fields, omegas = default_grids(m, 41, 801, span=5.0)
    peaks = spectrum_peaks(anticrossing_map(m, fields, omegas), 1)
    step = omegas[1] - omegas[0]
    # the magnon carries no port, so only the flat cavity line transmits
    assert all(abs(p[0] - OMEGA_C) <= step for p in peaks)


def test_map_threaded_equals_serial(model, monkeypatch):
    fields, omegas = default_grids(model, 31, 51)
    one = anticrossing_map(model, fields, omegas, workers=1)
    many = anticrossing_map(model, fields, omegas, workers=4)
    assert np.array_equal(one.values, many.values)
    monkeypatch.setenv(hybrid.THREADS_ENV, "3")
    assert np.array_equal(anticrossing_map(model, fields, omegas).values, one.values)


def test_spectrum_csv_round_trip(tmp_path, model):
    fields, omegas = default_grids(model, 11, 17)
    spec = anticrossing_map(model, fields, omegas)
    spec.to_csv(tmp_path / "m.csv", tmp_path / "p.csv")
    back = SpectrumMap.from_csv(tmp_path / "m.csv", tmp_path / "p.csv")
    assert np.allclose(back.values, spec.values, rtol=1e-12)
    assert np.allclose(back.frequency_axis, omegas, rtol=1e-14)
    header = (tmp_path / "m.csv").read_text().splitlines()[0].split(",")
    assert float(header[1]) == pytest.approx(omegas[0] / TWO_PI)


def test_model_config_round_trip(tmp_path, model):
    hybrid.save_model(model, tmp_path / "m.yaml")
    back = hybrid.load_model(tmp_path / "m.yaml")
    assert np.allclose(dynamical_matrix(back, True), dynamical_matrix(model, True), rtol=1e-12)


def test_model_rejects_bad_coupling_matrix():
    modes = (OscillatorMode.cavity(OMEGA_C, 1e6), OscillatorMode.magnon(1e6, 0.0, 0.38))
    with pytest.raises(ValueError):
        HybridSystemModel(modes, np.array([[0, 1.0], [2.0, 0]]), 0.38)
    with pytest.raises(ValueError):
        HybridSystemModel(modes, np.zeros((3, 3)), 0.38)


def test_four_mode_model_has_four_branches():
    modes = (OscillatorMode.cavity(OMEGA_C, 1e6), OscillatorMode.cavity(OMEGA_C + 5e8, 1e6),
             OscillatorMode.magnon(1e6, 0.0, 0.38), OscillatorMode.magnon(1e6, 2e8, 0.38))
    g = np.zeros((4, 4))
    g[0, 2] = g[2, 0] = G
    g[1, 3] = g[3, 1] = G / 2
    m = HybridSystemModel(modes, g, 0.38, (Port(0, 1e5), Port(1, 1e5)))
    fields = np.linspace(0.37, 0.40, 7)
    assert track_branches(m, fields).shape == (7, 4)
