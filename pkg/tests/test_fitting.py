import numpy as np
import pytest

from cmpmag import fitting
from cmpmag.constants import TWO_PI
from cmpmag.fitting import FitProblem, NonIdentifiableError, fit_anticrossing
from cmpmag.hybrid import SpectrumMap, anticrossing_map, default_grids

from conftest import G, pmhs

NAMES = ("omega:0", "g:0-1", "gamma:0", "gamma:1")


@pytest.fixture(scope="module")
def truth():
    return pmhs()


@pytest.fixture(scope="module")
def data(truth):
    fields, omegas = default_grids(truth, 61, 121, span=4.0)
    return anticrossing_map(truth, fields, omegas)


def start_model(truth):
    return fitting.set_parameters(truth, {"g:0-1": 0.8 * G, "gamma:0": TWO_PI * 6e6,
                                          "gamma:1": TWO_PI * 6e6,
                                          "omega:0": truth.omegas[0] + TWO_PI * 5e6})


def test_parameter_accessors(truth):
    assert fitting.get_parameter(truth, "g:0-1") == pytest.approx(G)
    m = fitting.set_parameters(truth, {"g:0-1": 2 * G})
    assert m.couplings[1, 0] == pytest.approx(2 * G)
    assert fitting.pmhs_parameters(truth) == NAMES


def test_noiseless_recovery(truth, data):
    problem = FitProblem(data, start_model(truth), NAMES, loss="log")
    result = fit_anticrossing(problem)
    for name in NAMES:
        assert result.parameters[name] == pytest.approx(fitting.get_parameter(truth, name),
                                                        rel=1e-6)
    assert result.residual_norm < 1e-6 * result.initial_residual_norm


def test_seed_from_ridges_lands_near_truth(truth, data):
    seeds = fitting.seed_two_mode(data, truth)
    assert seeds["g:0-1"] == pytest.approx(G, rel=0.1)
    assert seeds["omega:0"] == pytest.approx(truth.omegas[0], abs=TWO_PI * 10e6)
    assert abs(seeds["offset:1"]) < TWO_PI * 10e6


def test_noisy_fit_within_stderr(truth, data):
    rng = np.random.default_rng(5)
    noisy = SpectrumMap(data.field_axis, data.frequency_axis,
                        data.magnitude * (1 + 0.01 * rng.standard_normal(data.values.shape)))
    problem = FitProblem(noisy, start_model(truth), NAMES + ("scale",), loss="log")
    result = fit_anticrossing(problem)
    for name in NAMES:
        true = fitting.get_parameter(truth, name)
        assert result.parameters[name] == pytest.approx(true, rel=1e-2)
        assert abs(result.parameters[name] - true) < 5 * result.stderr[name]


def test_non_identifiable_parameters_reported(truth, data):
    # the two ports load the same mode; only their product/sum is constrained with scale free
    problem = FitProblem(data, truth, ("kappa:0", "kappa:1", "scale"))
    with pytest.raises(NonIdentifiableError) as err:
        fit_anticrossing(problem)
    assert set(err.value.combination) >= {"kappa:0", "kappa:1"}


def test_too_many_parameters_rejected(truth):
    fields, omegas = default_grids(truth, 3, 5)
    small = anticrossing_map(truth, fields, omegas)
    with pytest.raises(ValueError):
        FitProblem(small, truth, NAMES)


def test_start_outside_bounds_rejected(truth, data):
    with pytest.raises(ValueError):
        FitProblem(data, truth, ("g:0-1",), bounds={"g:0-1": (0.0, 0.5 * G)})


def test_spin_coupling_inversion():
    g = fitting.coupling_from_spins(1e21, TWO_PI * 10.4e9, 1e-6, 0.5)
    assert fitting.spins_from_coupling(g, TWO_PI * 10.4e9, 1e-6, 0.5) == pytest.approx(1e21)


def test_relaxation_time_from_linewidths():
    gamma = TWO_PI * 0.947e6
    assert fitting.relaxation_time_from_fit(gamma, gamma) == pytest.approx(168e-9, rel=1e-3)
    assert fitting.relaxation_time_from_fit(1.0, 3.0, photon_weight=1.0) == 1.0
