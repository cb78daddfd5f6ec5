import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wgqed.analytic import g2_two_emitter
from wgqed.dicke import (NUMBER, SIGMA_MINUS, StepSizeError, basis_state, bright_dark, collective_jump,
                         decay_spectrum, density_checks, dicke_states, embed, evolve, evolve_grid,
                         excited_population, lindblad_generator, lowering, projector, steady_state,
                         two_time_g2_oracle)
from wgqed.units import EmitterParams, TwoEmitterSystem, WaveguideSystem, energy_to_angular

GWG = 0.7


def _pair(k=0.0, sep=0.0, gamma=1.0, gamma_wg=GWG, t2=math.inf, delta=0.0):
    return TwoEmitterSystem.symmetric(gamma, gamma_wg, t2=t2, delta=delta, k=k, separation=sep)


def _random_density(rng, d):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


def test_basis_order_emitter_one_leftmost():
    assert np.argmax(np.abs(basis_state("eg"))) == 2
    assert np.argmax(np.abs(basis_state("ge"))) == 1
    assert np.allclose(lowering(0, 2) @ basis_state("eg"), basis_state("gg"))
    assert np.allclose(lowering(1, 2) @ basis_state("eg"), 0.0)
    # single-emitter embedding acts on the named site only
    assert np.allclose(embed(NUMBER, 1, 3) @ basis_state("geg"), basis_state("geg"))
    assert np.allclose(embed(NUMBER, 0, 3) @ basis_state("geg"), 0.0)
    with pytest.raises(ValueError):
        basis_state("ex")


def test_collective_jump_single_emitter():
    s = WaveguideSystem((EmitterParams(gamma=1.0, gamma_wg=GWG),))
    assert np.allclose(collective_jump(s), math.sqrt(GWG) * SIGMA_MINUS)


def test_collective_jump_in_phase_pair():
    eye = np.eye(2)
    want = math.sqrt(GWG) * (np.kron(SIGMA_MINUS, eye) + np.kron(eye, SIGMA_MINUS))
    assert np.allclose(collective_jump(_pair()), want)


@pytest.mark.parametrize("k,sep", [(0.0, 0.0), (math.pi, 1.0), (2.5, 3.0), (1.0, 0.4)])
def test_bright_state_emits_at_twice_the_rate(k, sep):
    s = _pair(k, sep)
    a = collective_jump(s)
    pair = dicke_states(s)
    n_b = np.vdot(pair.bright, a.conj().T @ a @ pair.bright).real
    n_d = np.vdot(pair.dark, a.conj().T @ a @ pair.dark).real
    assert n_b == pytest.approx(2 * GWG, abs=1e-12)
    assert abs(n_d) < 1e-12


def test_bright_dark_examples():
    eg, ge = basis_state("eg"), basis_state("ge")
    p = bright_dark(0.0)
    assert np.allclose(p.bright, (eg + ge) / math.sqrt(2)) and np.allclose(p.dark, (eg - ge) / math.sqrt(2))
    assert np.allclose(bright_dark(math.pi).bright, (eg - ge) / math.sqrt(2))


@given(st.floats(-10, 10))
def test_bright_dark_orthonormal(phi):
    p = bright_dark(phi)
    assert abs(np.vdot(p.bright, p.dark)) < 1e-12
    assert np.linalg.norm(p.bright) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(p.dark) == pytest.approx(1.0, abs=1e-12)


def test_zero_generator():
    s = TwoEmitterSystem(EmitterParams(gamma=1.0, gamma_wg=0.0), EmitterParams(gamma=1.0, gamma_wg=0.0))
    gen = lindblad_generator(s, channels=("waveguide",))
    assert np.allclose(gen.superoperator, 0.0)


def test_single_emitter_decay():
    s = WaveguideSystem((EmitterParams(gamma=0.8, gamma_wg=0.5),))
    gen = lindblad_generator(s)
    rho = evolve(projector(basis_state("e")), gen, 1 / 0.8)
    assert excited_population(rho) == pytest.approx(math.exp(-1), abs=1e-9)


def test_generator_trace_free():
    rng = np.random.default_rng(3)
    gen = lindblad_generator(_pair(k=1.3, sep=0.7, t2=0.9, delta=4.0), repump=0.05)
    for _ in range(100):
        rho = _random_density(rng, 4)
        assert abs(np.trace(gen.apply(rho))) < 1e-12
        vec = gen.superoperator @ rho.reshape(-1)
        assert np.allclose(vec.reshape(4, 4), gen.apply(rho), atol=1e-12)


def test_generator_rejects_bad_input():
    with pytest.raises(ValueError):
        lindblad_generator(_pair(), channels=("mystery",))
    with pytest.raises(ValueError):
        lindblad_generator(_pair(), repump=-1.0)
    with pytest.raises(ValueError):
        lindblad_generator(_pair(), channels=("independent", "waveguide"))


def test_hamiltonian_holds_detunings():
    s = _pair(delta=6.0)
    gen = lindblad_generator(s)
    assert np.allclose(np.diag(gen.hamiltonian).real, [0.0, -3.0, 3.0, 0.0])


def test_dephasing_gives_coherence_rate():
    e = EmitterParams(gamma=1.0, gamma_wg=1.0, t2=0.5)
    gen = lindblad_generator(WaveguideSystem((e,)))
    plus = np.array([1, 1], dtype=complex) / math.sqrt(2)
    rho = evolve(projector(plus), gen, 0.4)
    assert abs(rho[0, 1]) == pytest.approx(0.5 * math.exp(-e.coherence_rate * 0.4), rel=1e-9)


def test_evolve_zero_time_and_step_check():
    gen = lindblad_generator(_pair())
    rho0 = projector(basis_state("ee"))
    assert np.allclose(evolve(rho0, gen, 0.0), rho0)
    with pytest.raises(StepSizeError):
        evolve(rho0, gen, 1.0, dt=1.0)
    with pytest.raises(ValueError):
        evolve(rho0, gen, -1.0)


def test_bright_state_superradiant_rate():
    s = _pair(k=0.9, sep=1.7)
    gen = lindblad_generator(s, channels=("waveguide",))
    pair = dicke_states(s)
    times = np.linspace(0, 4.0 / GWG, 41)
    rhos = evolve_grid(projector(pair.bright), gen, times)
    pop = np.array([excited_population(r) for r in rhos])
    assert np.allclose(pop, np.exp(-2 * GWG * times), atol=1e-9)
    rate = -np.polyfit(times, np.log(pop), 1)[0]
    assert rate == pytest.approx(2 * GWG, rel=1e-4)


def test_dark_state_does_not_leak():
    s = _pair(k=0.9, sep=1.7)
    gen = lindblad_generator(s, channels=("waveguide",))
    rho = evolve(projector(dicke_states(s).dark), gen, 10.0 / GWG)
    assert abs(excited_population(rho) - 1.0) < 1e-10


def test_density_invariants_during_evolution():
    rng = np.random.default_rng(8)
    gen = lindblad_generator(_pair(k=0.4, sep=2.0, gamma=1.3, gamma_wg=0.9, t2=0.7, delta=3.0), repump=0.1)
    rhos = evolve_grid(_random_density(rng, 4), gen, np.linspace(0, 6, 13))
    for r in rhos:
        tr, herm, ev = density_checks(r)
        assert tr < 1e-9 and herm < 1e-12 and ev > -1e-9


def test_decay_spectrum_examples():
    assert np.allclose(decay_spectrum(2, [0.0, 0.0], 1.0), [2.0, 0.0], atol=1e-12)
    assert np.allclose(decay_spectrum(3, 0.0, GWG), [3 * GWG, 0, 0], atol=1e-9)
    assert np.allclose(decay_spectrum(2, [0.0, math.pi / 2], 1.0), [2.0, 0.0], atol=1e-12)
    with pytest.raises(ValueError):
        decay_spectrum(7, 0.0, 1.0)


@given(st.integers(1, 6), st.lists(st.floats(-7, 7), min_size=6, max_size=6), st.floats(0.01, 5))
def test_rate_sum_rule(n, phases, g):
    rates = decay_spectrum(n, phases[:n], g)
    assert rates.sum() == pytest.approx(n * g, rel=1e-12)
    assert np.allclose(rates[1:], 0.0, atol=1e-9 * g * n)


@given(st.lists(st.floats(-7, 7), min_size=4, max_size=4))
def test_decay_spectrum_swap_symmetric(phases):
    assert np.allclose(decay_spectrum(4, phases, 1.0), decay_spectrum(4, phases[::-1], 1.0), atol=1e-12)


def test_steady_state_is_stationary():
    gen = lindblad_generator(_pair(t2=0.5), repump=0.02)
    rho = steady_state(gen)
    assert np.max(np.abs(gen.apply(rho))) < 1e-12
    tr, herm, ev = density_checks(rho)
    assert tr < 1e-12 and ev > -1e-12


def test_oracle_single_emitter():
    e = EmitterParams(gamma=1 / 1.2, gamma_wg=0.8 / 1.2)
    tau = np.linspace(0, 8, 81)
    c = two_time_g2_oracle(WaveguideSystem((e,)), tau)
    assert c.form == "lindblad-oracle"
    assert np.max(np.abs(c.values - (1 - np.exp(-tau / 1.2)))) < 1e-4


def test_oracle_flat_for_identical_emitters():
    tau = np.linspace(0, 8, 81)
    s = _pair(gamma=1 / 1.2, gamma_wg=1 / 1.2)
    c = two_time_g2_oracle(s, tau)
    assert np.max(np.abs(c.values - 1.0)) < 1e-3
    assert np.max(np.abs(c.values - g2_two_emitter(s, tau))) < 1e-3
    assert np.max(np.abs(c.values - g2_two_emitter(s, tau, "paper"))) > 0.05


def test_oracle_detuned_binned_is_half():
    g = 1 / 1.2
    s = _pair(gamma=g, gamma_wg=g, t2=1.0, delta=energy_to_angular(145.0))
    tau = np.linspace(-0.1, 0.1, 401)
    c = two_time_g2_oracle(s, tau)
    assert np.mean(c.values) == pytest.approx(0.5, abs=2e-2)


def test_oracle_swap_symmetric():
    tau = np.linspace(0, 5, 51)
    a = EmitterParams(detuning=2.0, gamma=1.0, gamma_wg=1.0, t2=0.8)
    b = EmitterParams(detuning=-1.0, gamma=1.0, gamma_wg=1.0, t2=0.8)
    s = TwoEmitterSystem(a, b)
    one = two_time_g2_oracle(s, tau).values
    two = two_time_g2_oracle(s.swapped(), tau).values
    assert np.allclose(one, two, atol=1e-10)


def test_oracle_from_fully_excited():
    # from |ee> the first waveguide photon leaves a bright single excitation
    c = two_time_g2_oracle(_pair(gamma_wg=1.0), [0.0], preparation="ee", coupling="collective")
    assert np.isfinite(c.values[0]) and c.values[0] > 0
    with pytest.raises(ValueError):
        two_time_g2_oracle(_pair(), [0.0], coupling="mystery")
