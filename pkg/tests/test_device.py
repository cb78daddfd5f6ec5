import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wgqed.device import (DeviceWarning, EfficiencyChain, ThermalModel, WaveguideGeometry, chain_efficiency,
                          count_rate, crossing_power, fringe_period, fringe_spacing, group_index,
                          group_index_from_spectrum, match_resonance, power_to_temperature, purcell_formula,
                          q_over_v_for, synthetic_fringes, thermal_shift, thermal_sweep, write_sweep_csv)


def test_geometry_invariants():
    WaveguideGeometry(15.0, 3.4, 1330.0)
    with pytest.raises(ValueError):
        WaveguideGeometry(0.0)
    with pytest.raises(ValueError):
        WaveguideGeometry(15.0, index=1.0)


def test_group_index_example():
    assert group_index(1330.0, 15.0, 4.91) == pytest.approx(12.0, abs=0.02)
    # frozen: 1330^2 / (2 * 15000 * 4.91)
    assert group_index(1330.0, 15.0, 4.91) == pytest.approx(12.008825526137135, rel=1e-12)


def test_group_index_length_scaling():
    assert group_index(1330.0, 30.0, 4.91) == pytest.approx(0.5 * group_index(1330.0, 15.0, 4.91), rel=1e-12)


def test_group_index_errors():
    with pytest.raises(ZeroDivisionError):
        group_index(1330.0, 15.0, 0.0)
    with pytest.raises(ValueError):
        group_index(1330.0, -15.0, 4.91)


@given(st.floats(900, 1600), st.floats(1, 100), st.floats(2, 40))
def test_fringe_period_inverse(wl, length, ng):
    assert group_index(wl, length, fringe_period(wl, length, ng)) == pytest.approx(ng, rel=1e-12)


def test_fringe_spacing_example():
    ng = group_index(1330.0, 15.0, 4.91)
    wl, y = synthetic_fringes(1310.0, 1350.0, ng, 15.0, n_points=4001)
    fr = fringe_spacing(wl, y)
    assert fr.spacing == pytest.approx(4.91, abs=0.05)
    assert fr.sigma >= 0
    assert not fr.warnings


def test_fringe_spacing_monotone_raises():
    wl = np.linspace(1300, 1350, 500)
    with pytest.raises(ValueError):
        fringe_spacing(wl, wl - 1300)


def test_fringe_spacing_chirp_warns():
    ng = 12.0
    wl, y = synthetic_fringes(1250.0, 1410.0, ng, 15.0, n_points=8001, dispersion=0.6)
    with pytest.warns(DeviceWarning):
        fr = fringe_spacing(wl, y)
    # local spacing at the window centre, where the generator's index is ng
    assert fr.spacing == pytest.approx(fringe_period(fr.center, 15.0, ng), rel=0.03)
    assert fr.chirp > 0.1


@pytest.mark.parametrize("ng,length,noise,n_points", [(12.0, 15.0, 0.0, 4001), (8.0, 15.0, 0.01, 301),
                                                      (12.0, 30.0, 0.005, 201), (4.0, 10.0, 0.0, 4001)])
@pytest.mark.filterwarnings("ignore::wgqed.device.DeviceWarning")
def test_group_index_round_trip(ng, length, noise, n_points):
    d = fringe_period(1330.0, length, ng)
    wl, y = synthetic_fringes(1330.0 - 5 * d, 1330.0 + 5 * d, ng, length, n_points=n_points, noise=noise,
                              seed=3)
    est, _ = group_index_from_spectrum(wl, y, length)
    assert est == pytest.approx(ng, rel=0.02)


def test_purcell_trivial():
    assert purcell_formula(1000.0, 1.0, 0.0) == 0.0
    assert purcell_formula(2000.0, 1.0, 0.7) == pytest.approx(2 * purcell_formula(1000.0, 1.0, 0.7), rel=1e-12)


def test_purcell_anchor():
    qv = q_over_v_for(44.0)
    assert purcell_formula(qv * 0.5, 0.5, 1.0) == pytest.approx(44.0, rel=1e-12)
    assert purcell_formula(qv, 1.0, 0.5) == pytest.approx(11.0, rel=1e-12)


def test_purcell_absolute_volume():
    # 1 (lambda/n)^3 expressed in um^3
    v = (1.33 / 3.4) ** 3
    assert purcell_formula(500.0, v, 1.0, wavelength_nm=1330.0, index=3.4) == pytest.approx(
        purcell_formula(500.0, 1.0, 1.0), rel=1e-12)
    with pytest.raises(ValueError):
        purcell_formula(500.0, v, 1.0, wavelength_nm=1330.0)


@given(st.floats(10, 1e5), st.floats(0.1, 10), st.floats(0, 1), st.floats(0.1, 10))
def test_purcell_homogeneity(q, v, f, c):
    assert purcell_formula(c * q, v, f) == pytest.approx(c * purcell_formula(q, v, f), rel=1e-12, abs=1e-300)
    assert purcell_formula(q, c * v, f) == pytest.approx(purcell_formula(q, v, f) / c, rel=1e-12, abs=1e-300)


def test_purcell_errors():
    with pytest.raises(ValueError):
        purcell_formula(1000.0, 1.0, 1.5)
    with pytest.raises(ValueError):
        purcell_formula(-1.0, 1.0, 0.5)


def test_thermal_examples():
    m = ThermalModel()
    assert m.a == pytest.approx(1.2603, abs=1e-4)
    assert thermal_shift(4.0) == 0.0
    assert thermal_shift(26.0) == pytest.approx(610.0, rel=1e-12)
    assert thermal_shift(15.0) == pytest.approx(152.5, rel=1e-12)
    assert abs(thermal_shift(15.0) / 145.0 - 1) < 0.06
    for t in (3.0, 27.0):
        with pytest.raises(ValueError):
            thermal_shift(t)


def test_power_to_temperature():
    assert power_to_temperature(0.0) == 4.0
    assert power_to_temperature(200.0) == pytest.approx(15.0, rel=1e-12)
    assert power_to_temperature(100.0) == pytest.approx(9.5, rel=1e-12)
    with pytest.raises(ValueError):
        power_to_temperature(-1.0)


def test_match_resonance_examples():
    assert match_resonance(0.0) == 0.0
    p = match_resonance(145.0)
    assert 185.0 <= p <= 205.0
    assert abs(p / 200.0 - 1) < 0.05
    assert match_resonance(610.0) == pytest.approx(400.0, abs=0.01)
    with pytest.raises(ValueError):
        match_resonance(700.0)
    with pytest.raises(ValueError):
        match_resonance(-1.0)


def test_thermal_monotone():
    t = np.linspace(4.0, 26.0, 200)
    e = np.array([thermal_shift(x) for x in t])
    assert np.all(np.diff(e) > 0)


@given(st.floats(0.0, 610.0))
def test_match_resonance_right_inverse(target):
    p = match_resonance(target)
    # bisection to 0.01 uW; the shift slope is at most 2 a (T_max - T0) s
    m = ThermalModel()
    slope = 2 * m.a * (m.t_max - m.t0) * m.slope
    assert abs(thermal_shift(power_to_temperature(p)) - target) <= 0.01 * slope


def test_thermal_model_validation():
    with pytest.raises(ValueError):
        ThermalModel(a=-1.0)
    with pytest.raises(ValueError):
        ThermalModel(t_max=3.0)
    with pytest.raises(ValueError):
        ThermalModel.from_dict({"bogus": 1.0})
    assert ThermalModel.from_dict({"slope_K_per_uW": 0.1}).slope == 0.1


def test_sweep_and_crossing(tmp_path):
    rows = thermal_sweep([0.0, 100.0, 200.0], 1330.0, 1329.8)
    assert rows[0][1:] == pytest.approx((1330.0, 1329.8))
    # no crosstalk: dot A stays put, dot B red shifts
    assert all(r[1] == pytest.approx(1330.0) for r in rows)
    assert rows[2][2] > rows[1][2] > rows[0][2]
    path = tmp_path / "sweep.csv"
    write_sweep_csv(path, rows)
    lines = path.read_text().splitlines()
    assert lines[0] == "power_uW,lambdaA_nm,lambdaB_nm"
    assert len(lines) == 4
    p = crossing_power(1330.0, 1329.8)
    _, la, lb = thermal_sweep([p], 1330.0, 1329.8)[0]
    assert lb == pytest.approx(la, abs=2e-4)
    with pytest.raises(ValueError):
        crossing_power(1329.8, 1330.0)


def test_crosstalk_moves_dot_a():
    rows = thermal_sweep([200.0], 1330.0, 1329.8, ThermalModel(crosstalk=0.2))
    assert rows[0][1] > 1330.0


def test_chain_efficiency_default():
    assert chain_efficiency(EfficiencyChain.methods_default()) == pytest.approx(0.01696, rel=1e-12)
    assert chain_efficiency([0.37]) == pytest.approx(0.37)


def test_chain_permutation_invariant():
    vals = [0.40, 0.40, 0.53, 0.20]
    ref = chain_efficiency(vals)
    for perm in itertools.permutations(vals):
        assert chain_efficiency(list(perm)) == pytest.approx(ref, rel=1e-14)


def test_chain_errors():
    with pytest.raises(ValueError):
        EfficiencyChain(())
    with pytest.raises(ValueError):
        chain_efficiency([0.5, 1.2])
    with pytest.raises(ValueError):
        chain_efficiency([])


def test_count_rate_budget():
    rate = count_rate(5e6, 0.05, EfficiencyChain.methods_default())
    assert rate == pytest.approx(4240.0, rel=1e-12)
    assert abs(rate / 4300.0 - 1) < 0.02
    assert math.isclose(count_rate(5e6, 0.05, {"a": 0.5}.values()), 125000.0)
