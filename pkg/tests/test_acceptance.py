"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line with the measured numbers.
"""
import math
import time
import warnings

import numpy as np
import pytest

from wgqed import cli
from wgqed.analytic import g2_distinguishable, g2_indistinguishable, g2_two_emitter, visibility
from wgqed.config import resolve_config, run_simulation
from wgqed.device import (EfficiencyChain, chain_efficiency, count_rate, fringe_period, group_index_from_spectrum,
                          match_resonance, synthetic_fringes, thermal_shift)
from wgqed.dicke import (decay_spectrum, dicke_states, evolve, evolve_grid, excited_population, lindblad_generator,
                         projector, two_time_g2_oracle)
from wgqed.estimation import FitWarning, cw_fit_options, fit_cw_g2, fit_pulsed_g2, purcell_beta, subtract_dark
from wgqed.units import TwoEmitterSystem


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail
    return emit


def test_criterion_1_analytic_limits(report):
    t0 = time.perf_counter()
    tau = np.zeros(1)
    d = float(g2_distinguishable(1 / 1.2, tau)[0])
    i_der = float(g2_indistinguishable(1 / 1.2, 3.57, tau)[0])
    i_pap = float(g2_indistinguishable(1 / 1.2, 3.57, tau, "paper")[0])
    dt = time.perf_counter() - t0
    ok = abs(d - 0.5) <= 1e-12 and abs(i_der - 1) <= 1e-12 and abs(i_pap - 1) <= 1e-12 and dt < 1
    report(1, ok, f"distinguishable {d!r}, indistinguishable {i_der!r} / {i_pap!r}, {dt:.3f} s")


def test_criterion_2_oracle_equivalence(report):
    rng = np.random.default_rng(2024)
    tau = np.linspace(0, 8, 161)
    t0 = time.perf_counter()
    worst, paper_best = 0.0, math.inf
    for _ in range(20):
        g = rng.uniform(0.5, 2.0)
        s = TwoEmitterSystem.symmetric(g, g, t2=rng.uniform(0.2, 5.0), delta=rng.uniform(-20, 20))
        o = two_time_g2_oracle(s, tau).values
        worst = max(worst, float(np.max(np.abs(o - g2_two_emitter(s, tau)))))
        paper_best = min(paper_best, float(np.max(np.abs(o - g2_two_emitter(s, tau, "paper")))))
    dt = time.perf_counter() - t0
    ok = worst < 1e-3 and paper_best >= 1e-3 and dt < 60
    report(2, ok, f"derived sup error {worst:.2e}, printed form smallest error {paper_best:.3f} (must fail), "
                  f"{dt:.2f} s")


def test_criterion_3_superradiant_rate(report):
    gwg = 0.7
    s = TwoEmitterSystem.symmetric(1.0, gwg, k=0.9, separation=1.7)
    gen = lindblad_generator(s, channels=("waveguide",))
    pair = dicke_states(s)
    times = np.linspace(0, 4.0 / gwg, 41)
    pop = np.array([excited_population(r) for r in evolve_grid(projector(pair.bright), gen, times)])
    rate = -np.polyfit(times, np.log(pop), 1)[0]
    rel = abs(rate / (2 * gwg) - 1)
    leak = abs(1.0 - excited_population(evolve(projector(pair.dark), gen, 10.0 / gwg)))
    report(3, rel <= 1e-4 and leak < 1e-10, f"bright rate relative error {rel:.1e}, dark leakage {leak:.1e}")


def test_criterion_4_two_emitter_cw(report):
    t0 = time.perf_counter()
    fits, totals = {}, {}
    for name in ("offres", "onres"):
        cfg = resolve_config(name)
        hist = run_simulation(cfg).histogram
        form, free, initial = cw_fit_options(hist)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FitWarning)
            fits[name] = fit_cw_g2(hist, form, free=free, initial=initial)
        totals[name] = hist.total
        e = cfg.system.emitters[0]
        beta = 0.5 * e.gamma + 1 / e.t2
    dt = time.perf_counter() - t0
    off, on = fits["offres"]["g2_0"], fits["onres"]["g2_0"]
    v = visibility(on, off)
    ok = (abs(off - 0.65) <= 0.05 and abs(on - 1.0) <= 0.1 and abs(v - 0.55) <= 0.15
          and min(totals.values()) >= 1e5 and all(f.converged for f in fits.values()) and dt < 300
          and abs(0.5 / beta - 0.140) < 1e-3 and abs(e.gamma - 1 / 1.2) < 1e-6)
    report(4, ok, f"g2_off(0) {off:.3f}, g2_on(0) {on:.3f}, visibility {v:.3f}, coincidences "
                  f"{totals['offres']:.0f}/{totals['onres']:.0f}, 1/(2 beta) {0.5 / beta * 1e3:.1f} ps, {dt:.0f} s")


def test_criterion_5_single_dot_pulsed(report):
    t0 = time.perf_counter()
    cfg = resolve_config("dotA_pulsed")
    pulses = cfg.duration / cfg.schedule.period
    hist = run_simulation(cfg).histogram
    res = fit_pulsed_g2(subtract_dark(hist), cfg.schedule.period)
    dt = time.perf_counter() - t0
    g = res["g2_0"]
    ok = res.converged and g <= 0.15 and pulses >= 1e6 and dt < 120
    report(5, ok, f"g2(0) {g:.3f} +- {res.sigma('g2_0'):.3f} after dark subtraction, {pulses:.0f} pulses, {dt:.0f} s")


def test_criterion_6_device_formulas(report):
    eff = chain_efficiency(EfficiencyChain.methods_default())
    rate = count_rate(5e6, 0.05, EfficiencyChain.methods_default())
    beta = purcell_beta(0.71, 0.45, 0.12)["beta"]
    # the 3 pp band is taken around 0.831 itself; the rounded 80% anchor is 3.1 pp away
    ok = abs(100 * eff - 1.696) <= 0.05 and abs(rate / 4300 - 1) <= 0.03 and abs(beta - 0.831) <= 0.03
    report(6, ok, f"chain {100 * eff:.3f}%, count rate {rate / 1e3:.2f} kc/s, beta {beta:.4f} "
                  f"({100 * (beta - 0.80):+.1f} pp from 80%)")


def test_criterion_7_group_index_round_trip(report):
    d = fringe_period(1330.0, 15.0, 12.0)
    wl, y = synthetic_fringes(1330.0 - 5 * d, 1330.0 + 5 * d, 12.0, 15.0, n_points=4001)
    ng, _ = group_index_from_spectrum(wl, y, 15.0)
    report(7, abs(ng / 12.0 - 1) <= 0.02, f"recovered n_g {ng:.4f}")


def test_criterion_8_thermal_chain(report):
    p = match_resonance(145.0)
    e26 = thermal_shift(26.0)
    report(8, 185 <= p <= 205 and abs(e26 - 610.0) <= 1e-9, f"match(145 ueV) {p:.2f} uW, shift(26 K) {e26!r} ueV")


def test_criterion_9_n_emitter_spectrum(report):
    g = 0.7
    rates = decay_spectrum(3, 0.0, g)
    ok = np.allclose(rates, [3 * g, 0, 0], atol=1e-9)
    rng = np.random.default_rng(9)
    worst = 0.0
    for n in range(1, 7):
        for _ in range(20):
            r = decay_spectrum(n, rng.uniform(-7, 7, n), g)
            worst = max(worst, abs(r.sum() - n * g) / (n * g))
    ok = ok and worst <= 1e-12
    report(9, ok, f"N=3 in phase {np.round(rates, 12).tolist()}, worst rate-sum relative error {worst:.1e}")


def test_criterion_10_determinism(report, tmp_path, capsys):
    runs = [("dotA_pulsed", "1e6"), ("offres", "2e5"), ("onres", "2e5"), ("dotB_pulsed", "1e6")]
    codes = []
    for name, dur in runs:
        codes.append(cli.main(["simulate", name, "--seed", "42", "--duration-ns", dur, "--out",
                               str(tmp_path / name), "--check"]))
    out = capsys.readouterr().out
    ok = codes == [0] * len(runs) and out.count("check passed: rerun is byte-identical") == len(runs)
    report(10, ok, f"{sum(c == 0 for c in codes)}/{len(runs)} scenarios byte-identical on rerun")
