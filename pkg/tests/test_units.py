import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wgqed.units import (EmitterParams, TwoEmitterSystem, angular_to_energy, energy_separation,
                         energy_to_angular, energy_to_wavelength, waveguide_phase, wavelength_to_energy)

finite = st.floats(-1e4, 1e4, allow_nan=False)


def test_energy_to_angular_values():
    assert energy_to_angular(0.0) == 0.0
    # 1/hbar with hbar = 0.6582119569 ueV ns
    assert energy_to_angular(145.0) == pytest.approx(220.2939, abs=1e-3)
    assert energy_to_angular(10.0) == pytest.approx(15.1927, abs=1e-3)


def test_wavelength_to_energy_values():
    assert wavelength_to_energy(1239.84198) == pytest.approx(1000.0, rel=1e-12)
    assert wavelength_to_energy(1314.5) == pytest.approx(943.204, abs=1e-3)
    assert energy_separation(1314.3, 1314.5) == pytest.approx(143.53, abs=0.01)
    with pytest.raises(ValueError):
        wavelength_to_energy(0.0)
    with pytest.raises(ValueError):
        wavelength_to_energy(-5.0)


@given(finite)
def test_energy_round_trip(x):
    assert angular_to_energy(energy_to_angular(x)) == pytest.approx(x, rel=1e-12, abs=1e-300)


@given(st.floats(100.0, 5000.0))
def test_wavelength_round_trip(wl):
    assert energy_to_wavelength(wavelength_to_energy(wl)) == pytest.approx(wl, rel=1e-12)


@given(finite, finite)
def test_energy_to_angular_linear(a, b):
    lhs = energy_to_angular(a + b)
    rhs = energy_to_angular(a) + energy_to_angular(b)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


def _pair(k, sep):
    e = EmitterParams(gamma=1.0, gamma_wg=1.0)
    return TwoEmitterSystem(e, EmitterParams(gamma=1.0, gamma_wg=1.0, position=sep), k)


def test_waveguide_phase_examples():
    assert waveguide_phase(_pair(math.pi, 2.0)) == pytest.approx(0.0, abs=1e-12)
    assert waveguide_phase(_pair(math.pi, 1.0)) == pytest.approx(math.pi, abs=1e-12)
    assert waveguide_phase(_pair(2.5, 3.0)) == pytest.approx(7.5 - 2 * math.pi, abs=1e-12)
    assert waveguide_phase(_pair(2.5, 3.0)) == pytest.approx(1.2168, abs=1e-4)


@given(st.floats(-20, 20), st.floats(-10, 10))
def test_waveguide_phase_range(k, sep):
    phi = waveguide_phase(_pair(k, sep))
    assert 0.0 <= phi < 2 * math.pi


def test_emitter_invariants():
    with pytest.raises(ValueError):
        EmitterParams(gamma=0.0)
    with pytest.raises(ValueError):
        EmitterParams(gamma=1.0, gamma_wg=1.5)
    with pytest.raises(ValueError):
        EmitterParams(gamma=1.0, gamma_wg=-0.1)
    with pytest.raises(ValueError):
        EmitterParams(gamma=1.0, gamma_wg=0.5, t2=0.0)
    e = EmitterParams(gamma=1.0, gamma_wg=0.5, t2=2.0)
    assert e.coherence_rate == pytest.approx(1.0)
    assert EmitterParams(gamma=1.0).dephasing_rate == 0.0


def test_from_physical_units():
    e = EmitterParams.from_physical(detuning_ueV=72.5, lifetime_ns=1.2, beta_factor=0.8)
    assert e.gamma == pytest.approx(1 / 1.2)
    assert e.gamma_wg == pytest.approx(0.8 / 1.2)
    assert e.detuning == pytest.approx(energy_to_angular(72.5))
    with pytest.raises(ValueError):
        EmitterParams.from_physical(lifetime_ns=1.0, gamma_per_ns=1.0)


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_delta_antisymmetric(da, db):
    s = TwoEmitterSystem(EmitterParams(detuning=da), EmitterParams(detuning=db))
    assert s.swapped().delta == pytest.approx(-s.delta)


def test_symmetric_pair():
    s = TwoEmitterSystem.symmetric(0.8, t2=0.5, delta=3.0)
    assert s.delta == pytest.approx(3.0)
    assert s.beta == pytest.approx(0.4 + 2.0)
    assert np.isclose(EmitterParams.t2_for_coherence_rate(0.8, 2.4), 0.5)
