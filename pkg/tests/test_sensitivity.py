import math

import pytest

from cmpmag import sensitivity as sens
from cmpmag.bloch import absorbed_power
from cmpmag.constants import TWO_PI
from cmpmag.sidebands import first_sideband_level

K_B, MU_B, GAMMA = 1.3807e-23, 9.274e-24, TWO_PI * 28e9


def test_noise_density():
    assert sens.noise_density(300.0) == pytest.approx(300 * K_B)
    with pytest.raises(ValueError):
        sens.noise_density(0.0)


def test_tsm_reference_point():
    oracle = math.sqrt(K_B * 1.0 / (GAMMA * MU_B * 1e21 * TWO_PI * 10.4e9 * 168e-9))
    value = sens.tsm_sensitivity(sens.noise_density(1.0), 1e21, TWO_PI * 10.4e9, 168e-9)
    assert value == pytest.approx(oracle, rel=1e-12)
    assert value == pytest.approx(0.88e-18, rel=5e-3)


def test_lsm_reference_point():
    oracle = 2 * 0.4 / (math.pi * 0.5 * 1e4) * math.sqrt(300 * K_B / 0.1)
    value = sens.lsm_sensitivity(0.4, 0.5, 1e4, sens.noise_density(300.0), 0.1)
    assert value == pytest.approx(oracle, rel=1e-12)
    assert value == pytest.approx(10.4e-15, rel=5e-3)


def test_lsm_extra_noise_adds_to_readout():
    a = sens.lsm_sensitivity(0.4, 0.5, 1e4, 1e-21, 0.1, extra_noise_density=3e-21)
    assert a == pytest.approx(sens.lsm_sensitivity(0.4, 0.5, 1e4, 4e-21, 0.1))


def test_lsm_rejects_bad_r():
    with pytest.raises(ValueError):
        sens.lsm_sensitivity(0.4, 1.2, 1e4, 1e-21, 0.1)


def test_quantum_limit_at_ten_gigahertz():
    assert sens.quantum_limit_temperature(TWO_PI * 10.4e9) == pytest.approx(0.4991, rel=1e-3)


def test_friis_cascade():
    chain = sens.ReadoutChain(((100.0, 2.0), (10.0, 50.0), (1.0, 1000.0)))
    assert sens.cascade_noise_temperature(chain) == pytest.approx(2 + 0.5 + 1.0)


def test_system_temperature_adds_quantum_limit():
    chain = sens.ReadoutChain(((100.0, 2.0),), physical_temperature=0.1,
                              quantum_limit_included=True)
    w = TWO_PI * 10e9
    expect = 2.1 + sens.quantum_limit_temperature(w)
    assert sens.system_noise_temperature(chain, w) == pytest.approx(expect)
    with pytest.raises(ValueError):
        sens.system_noise_temperature(chain)


def test_radiometer_fourth_root():
    assert sens.integrated_field_limit(1e-18, 16.0, 1.0) == pytest.approx(2e-18)
    assert sens.integrated_field_limit(1e-18, 1.0, 16.0) == pytest.approx(0.5e-18)
    with pytest.raises(ValueError):
        sens.integrated_field_limit(1e-18, 1.0, 0.5)


def test_tsm_inverts_absorbed_power():
    b = 3.7e-18
    p = absorbed_power(1e21, 6e10, b, 2e-7)
    assert sens.tsm_sensitivity(p * 1.0, 1e21, 6e10, 2e-7) == pytest.approx(b, rel=1e-12)


def test_lsm_inverts_sideband_level_at_unit_r():
    s = sens.lsm_sensitivity(0.4, 1.0, 1e4, 4e-21, 0.1)
    assert first_sideband_level(math.sqrt(0.1), 1e4, s, 0.4) ** 2 / 0.1 == pytest.approx(
        4e-21, rel=1e-12)


def test_reports_round_trip():
    rep = sens.lsm_report(0.4, 0.5, 2750, 4e-21, 2e-4, loss_factor=2.1)
    back = sens.SensitivityReport.from_keyvalue(rep.to_keyvalue())
    assert back.sensitivity == pytest.approx(rep.sensitivity, rel=1e-15)
    assert back.recompute() == pytest.approx(rep.sensitivity, rel=1e-12)
    assert back.loss_factor == 2.1


def test_tsm_report_carries_coherence_caveats():
    rep = sens.tsm_report(1e-23, 1e21, 6e10, 1e-7)
    assert len(rep.notes) == 2 and all("coherence" in n for n in rep.notes)
    assert sens.limit_report(1e-18, 10.0, 10.0).units == "T"


def test_sweep_and_csv(tmp_path):
    base = {"B0": 0.4, "r": 0.5, "Q": 1e4, "sigma_P": 4e-21, "pump_power": 0.1}
    reps = sens.sweep("lsm", base, "Q", [1e3, 1e4, 1e5])
    assert [r.sensitivity for r in reps] == sorted((r.sensitivity for r in reps), reverse=True)
    sens.write_sweep_csv(reps, tmp_path / "s.csv", "Q")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "Q,sensitivity,formula"
    reps = sens.sweep("lsm", base, "loss_factor", [1.0, 2.0])
    sens.write_sweep_csv(reps, tmp_path / "l.csv", "loss_factor")
    assert (tmp_path / "l.csv").read_text().splitlines()[2].startswith("2.0,")
