"""Command-line front end: simulate, fit, analytic, device."""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import analytic, device
from .config import ConfigError, resolve_config, run_simulation
from .estimation import (DecayCurve, Spectrum, fit_cw_g2, fit_lifetime, fit_lorentzian, fit_pulsed_g2,
                         lorentzian, peak_separation, pulsed_model, purcell_beta, subtract_dark)
from .estimation.g2fit import _subbin, cw_fit_options
from .hbt.histogram import CorrelationHistogram
from .hbt.stream import write_json
from .units import energy_to_angular

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2
OUTPUT_ENV = "WGQED_OUTPUT_DIR"


class InputError(Exception):
    pass


class NumericalFailure(Exception):
    pass


def _out_dir(arg, cfg_dir=None):
    d = Path(arg or cfg_dir or os.environ.get(OUTPUT_ENV) or "wgqed_out")
    d.mkdir(parents=True, exist_ok=True)
    return d


# simulate

def _write_run(cfg, out, stream_format):
    res = run_simulation(cfg)
    stem = out / cfg.scenario
    files = []
    if stream_format == "csv":
        res.stream.to_csv(f"{stem}_stream.csv")
        files += [f"{stem}_stream.csv", f"{stem}_stream.json"]
    elif stream_format == "binary":
        res.stream.to_binary(f"{stem}_stream.bin")
        files += [f"{stem}_stream.bin", f"{stem}_stream.json"]
    res.histogram.to_csv(f"{stem}_hist.csv")
    files += [f"{stem}_hist.csv", f"{stem}_hist.json"]
    a, b = res.clicks
    summary = {"singles_rate_a_per_s": a.rate * 1e9, "singles_rate_b_per_s": b.rate * 1e9,
               "total_coincidences": res.histogram.total, "emitted_waveguide_photons": res.stream.count("waveguide"),
               "signal_rate_per_ns": res.signal_rate}
    write_json(f"{stem}_run.json", {"config": cfg.raw, "summary": summary})
    files.append(f"{stem}_run.json")
    return files, summary


def _digest(files):
    return {Path(f).name: hashlib.sha256(Path(f).read_bytes()).hexdigest() for f in files}


def cmd_simulate(args):
    cfg = resolve_config(args.config, args.duration_ns, args.seed)
    out = _out_dir(args.out, cfg.output_dir)
    files, summary = _write_run(cfg, out, args.stream_format)
    print(f"scenario {cfg.scenario}: seed {cfg.seed}, duration {cfg.duration:g} ns")
    print(f"singles A {summary['singles_rate_a_per_s']:.1f} /s, B {summary['singles_rate_b_per_s']:.1f} /s")
    print(f"total coincidences {summary['total_coincidences']:.0f}")
    for f in files:
        print(f"wrote {f}")
    if args.check:
        with tempfile.TemporaryDirectory() as tmp:
            files2, _ = _write_run(cfg, Path(tmp), args.stream_format)
            h1, h2 = _digest(files), _digest(files2)
        for name, h in h1.items():
            print(f"sha256 {h} {name}")
        if h1 != h2:
            bad = sorted(k for k in h1 if h1[k] != h2.get(k))
            raise NumericalFailure(f"rerun differs for {bad}")
        print("check passed: rerun is byte-identical")
    return EXIT_OK


# fit

def _sniff(path):
    p = Path(path)
    if not p.exists():
        raise InputError(f"{path}: no such file")
    text = p.read_text().strip()
    if not text:
        raise InputError(f"{path}: empty file")
    header = next((ln for ln in text.splitlines() if ln and not ln.startswith("#")), "")
    header = header.replace(" ", "")
    for kind, prefix in (("histogram", "tau_ns,counts"), ("spectrum", "wavelength_nm,counts"),
                         ("decay", "t_ns,counts")):
        if header.startswith(prefix):
            return kind
    raise InputError(f"{path}: unrecognized header {header[:40]!r}")


_KIND_MODELS = {"histogram": ("pulsed", "cw"), "spectrum": ("lorentzian",), "decay": ("lifetime",)}


def _pick_model(kind, flag, hist=None):
    allowed = _KIND_MODELS[kind]
    if flag != "auto":
        if flag not in allowed:
            raise InputError(f"model {flag!r} does not apply to a {kind} file (use one of {allowed})")
        return flag
    if len(allowed) == 1:
        return allowed[0]
    mode = (hist.metadata.get("fit", {}) or {}).get("model") or hist.metadata.get("mode")
    if mode not in allowed:
        raise InputError("ambiguous model: histogram metadata does not say pulsed or cw; pass --model")
    return mode


def _write_curve(path, header, columns):
    rows = [header] + [",".join(f"{v!r}" for v in row) for row in zip(*(np.asarray(c, float).tolist() for c in columns))]
    Path(path).write_text("\n".join(rows) + "\n")


def _fit_histogram(model, hist, args):
    meta_fit = hist.metadata.get("fit", {}) or {}
    if model == "pulsed":
        period = args.period_ns or meta_fit.get("period_ns") or hist.metadata.get("period_ns") or 25.0
        data = subtract_dark(hist) if args.subtract_dark else hist
        res = fit_pulsed_g2(data, float(period))
        p = dict(zip(res.names, res.values))
        sub = _subbin(data.centers, data.bin_width)
        curve = pulsed_model(sub.ravel(), p["A0"], p["A"], p["tau_d"], p["period"]).reshape(sub.shape).mean(1)
        cols = (data.centers, data.counts, curve)
        print(f"g2(0) = {res['g2_0']:.4f} +- {res.sigma('g2_0'):.4f}")
        print(f"decay time {res['tau_d']:.4f} ns, peak spacing {res['period']:.4f} ns")
        return res, "tau_ns,counts,model", cols
    form, free, initial = cw_fit_options(hist)
    if args.delta_ueV is not None:
        initial["delta"] = energy_to_angular(args.delta_ueV)
    if args.jitter_fwhm_ns is not None:
        initial["jitter"] = args.jitter_fwhm_ns
    if args.rho is not None:
        initial["rho"] = args.rho
    if args.free:
        free = args.free.split(",")
    form = args.form or form
    res = fit_cw_g2(hist, form, free=free, initial=initial)
    p = {**res.fixed, **dict(zip(res.names, res.values))}
    sub = _subbin(hist.centers, hist.bin_width)
    curve = p["norm"] * analytic.g2_observed(sub.ravel(), p["gamma"], p["beta"], p["delta"], p["rho"],
                                             p["jitter"], form).reshape(sub.shape).mean(1)
    print(f"g2(0) = {res['g2_0']:.4f} +- {res.sigma('g2_0'):.4f} (exponent form {form})")
    print(f"dip width 1/gamma = {res['dip_width']:.4f} ns")
    print(f"coherence 1/beta = {res['coherence_time_inv_beta']:.4f} ns, "
          f"1/(2 beta) = {res['coherence_time_inv_2beta']:.4f} ns")
    return res, "tau_ns,g2,model", (hist.centers, hist.normalized(), curve)


def cmd_fit(args):
    kind = _sniff(args.input)
    try:
        if kind == "histogram":
            data = CorrelationHistogram.from_csv(args.input)
        elif kind == "spectrum":
            data = Spectrum.from_csv(args.input)
        else:
            data = DecayCurve.from_csv(args.input)
    except (ValueError, KeyError, IndexError) as exc:
        raise InputError(f"{args.input}: malformed input ({exc})") from None
    model = _pick_model(kind, args.model, data if kind == "histogram" else None)
    if kind == "histogram":
        res, header, cols = _fit_histogram(model, data, args)
    elif kind == "spectrum":
        res = fit_lorentzian(data, args.n_peaks)
        p = dict(zip(res.names, res.values))
        curve = np.full_like(data.wavelength, p["baseline"])
        for i in range(args.n_peaks):
            curve += lorentzian(data.wavelength, p[f"center_{i}"], p[f"fwhm_{i}"], p[f"amplitude_{i}"])
            print(f"peak {i}: {p[f'center_{i}']:.5f} nm, FWHM {p[f'fwhm_{i}']:.5f} nm")
        if args.n_peaks >= 2:
            sep, cls = peak_separation(res)
            print(f"separation {sep:.2f} ueV ({cls})")
        header, cols = "wavelength_nm,counts,model", (data.wavelength, data.intensity, curve)
    else:
        res = fit_lifetime(data.time, data.counts)
        print(f"decay rate {res['gamma']:.5f} +- {res.sigma('gamma'):.5f} /ns")
        header, cols = "t_ns,counts", (data.time, data.counts)
    for w in res.warnings:
        print(f"warning: {w}")
    out = _out_dir(args.out)
    stem = out / (args.prefix or Path(args.input).stem)
    res.to_json(f"{stem}_fit.json")
    _write_curve(f"{stem}_fitcurve.csv", header, cols)
    print(f"wrote {stem}_fit.json")
    if not res.converged:
        raise NumericalFailure(f"fit did not converge: {res.message}")
    return EXIT_OK


# analytic

_FORM_ALIASES = {"derived": "derived", "derived-exponent": "derived", "paper": "paper",
                 "paper-exponent": "paper", "distinguishable": "distinguishable",
                 "distinguishable-limit": "distinguishable", "indistinguishable": "indistinguishable",
                 "indistinguishable-limit": "indistinguishable"}
_TAGS = {"derived": "derived-exponent", "paper": "paper-exponent",
         "distinguishable": "distinguishable-limit", "indistinguishable": "indistinguishable-limit"}


def _analytic_values(form, tau, gamma, beta, delta, rho, jitter):
    if form == "distinguishable":
        return analytic.g2_distinguishable_observed(tau, gamma, rho, jitter)
    if form == "indistinguishable":
        delta, form = 0.0, "derived"
    return analytic.g2_observed(tau, gamma, beta, delta, rho, jitter, form)


def cmd_analytic(args):
    form = _FORM_ALIASES.get(args.form)
    if form is None:
        raise InputError(f"unknown form {args.form!r}; choose from {sorted(_FORM_ALIASES)}")
    if args.tau is not None:
        tau = np.array(args.tau, dtype=float)
    else:
        start, stop, n = args.tau_range
        tau = np.linspace(float(start), float(stop), int(n))
    gamma = args.gamma
    beta = args.beta if args.beta is not None else (
        0.5 * gamma + (0.0 if args.t2_ns is None else 1.0 / args.t2_ns))
    if beta < 0.5 * gamma:
        raise InputError("beta must be at least gamma/2")
    delta = energy_to_angular(args.delta_ueV)
    values = _analytic_values(form, tau, gamma, beta, delta, args.rho, args.jitter_fwhm_ns)
    curve = analytic.G2Curve(tau, values, _TAGS[form])
    if args.out:
        curve.to_csv(args.out)
        print(f"wrote {args.out}")
    if tau.size <= 20:
        for t, v in zip(tau, values):
            print(f"tau {t:g} ns  g2 {v:.6f}")
    if args.compare:
        d = _analytic_values("derived", tau, gamma, beta, delta, args.rho, args.jitter_fwhm_ns)
        p = _analytic_values("paper", tau, gamma, beta, delta, args.rho, args.jitter_fwhm_ns)
        diff = np.abs(d - p)
        i = int(np.argmax(diff))
        print("exponent comparison: form 'derived' uses exp(-2 beta tau), form 'paper' uses exp(-beta tau)")
        print(f"max |derived - paper| = {diff[i]:.6f} at tau = {tau[i]:g} ns "
              f"(derived {d[i]:.6f}, paper {p[i]:.6f})")
    return EXIT_OK


# device

def _thermal(args):
    if getattr(args, "thermal_config", None):
        return device.ThermalModel.from_dict(json.loads(Path(args.thermal_config).read_text()))
    kw = {}
    if getattr(args, "crosstalk", None) is not None:
        kw["crosstalk"] = args.crosstalk
    return device.ThermalModel(**kw)


def cmd_device(args):
    sub = args.device_cmd
    if sub == "group-index":
        if args.spectrum:
            spec = Spectrum.from_csv(args.spectrum)
            ng, fr = device.group_index_from_spectrum(spec.wavelength, spec.intensity, args.l)
            for w in fr.warnings:
                print(f"warning: {w}")
            print(f"fringe spacing {fr.spacing:.4f} +- {fr.sigma:.4f} nm at {fr.center:.2f} nm")
        else:
            if args.wavelength is None or args.dlambda is None:
                raise InputError("group-index needs --lambda and --dlambda, or --spectrum")
            ng = device.group_index(args.wavelength, args.l, args.dlambda)
        print(f"group index {ng:.2f}")
    elif sub == "purcell":
        if args.rates:
            gc, gb, gu = args.rates
            r = purcell_beta(gc, gb, gu)
            print(f"Purcell enhancement {r['purcell']:.3f}, coupling efficiency {r['beta']:.3f}")
        if args.q is not None and args.v is not None:
            f = device.purcell_formula(args.q, args.v, args.field_ratio)
            print(f"Purcell factor {f:.3f}")
        if args.target is not None:
            print(f"Q/V' needed for F_P = {args.target:g}: {device.q_over_v_for(args.target):.3f}")
        if not (args.rates or (args.q is not None and args.v is not None) or args.target is not None):
            raise InputError("purcell needs --q and --v, --rates or --target")
    elif sub == "thermal-sweep":
        model = _thermal(args)
        p_max = min(args.p_max if args.p_max is not None else model.max_power, model.max_power)
        powers = np.linspace(0.0, p_max, args.steps)
        rows = device.thermal_sweep(powers, args.lambda_a, args.lambda_b, model)
        if args.out:
            device.write_sweep_csv(args.out, rows)
            print(f"wrote {args.out}")
        try:
            print(f"crossing at {device.crossing_power(args.lambda_a, args.lambda_b, model):.2f} uW")
        except ValueError as exc:
            print(f"no crossing: {exc}")
    elif sub == "match":
        p = device.match_resonance(args.delta_ueV, _thermal(args))
        print(f"heater power {p:.2f} uW")
    elif sub == "efficiency":
        vals = [float(v) for v in args.stages.split(",") if v.strip()]
        eff = device.chain_efficiency(vals)
        print(f"chain efficiency {100 * eff:.3f}%")
        if args.pulse_rate_mhz is not None:
            rate = device.count_rate(args.pulse_rate_mhz * 1e6, args.collection, vals)
            print(f"count rate {rate / 1e3:.2f} kcounts/s")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="wgqed", description="waveguide QED simulation and analysis")
    sp = p.add_subparsers(dest="cmd", required=True)

    s = sp.add_parser("simulate", help="run a scenario: stream, detection, histogram")
    s.add_argument("config", help="config JSON file or bundled scenario name")
    s.add_argument("--seed", type=int)
    s.add_argument("--duration-ns", type=float)
    s.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./wgqed_out)")
    s.add_argument("--stream-format", choices=("csv", "binary", "none"), default="csv")
    s.add_argument("--check", action="store_true", help="rerun and compare output hashes")
    s.set_defaults(func=cmd_simulate)

    f = sp.add_parser("fit", help="fit a histogram, spectrum or decay curve")
    f.add_argument("input")
    f.add_argument("--model", default="auto", choices=("auto", "pulsed", "cw", "lorentzian", "lifetime"))
    f.add_argument("--out")
    f.add_argument("--prefix")
    f.add_argument("--period-ns", type=float)
    f.add_argument("--form", choices=("derived", "paper"))
    f.add_argument("--free", help="comma-separated free cw parameters")
    f.add_argument("--delta-ueV", type=float)
    f.add_argument("--jitter-fwhm-ns", type=float)
    f.add_argument("--rho", type=float)
    f.add_argument("--n-peaks", type=int, default=2)
    f.add_argument("--no-subtract-dark", dest="subtract_dark", action="store_false")
    f.set_defaults(func=cmd_fit)

    a = sp.add_parser("analytic", help="sample a closed-form g2")
    a.add_argument("--form", default="derived")
    g = a.add_mutually_exclusive_group()
    g.add_argument("--tau", type=float, nargs="+")
    g.add_argument("--tau-range", nargs=3, metavar=("START", "STOP", "N"), default=("0", "5", "251"))
    a.add_argument("--gamma", type=float, default=1 / 1.2, help="radiative rate (1/ns)")
    a.add_argument("--beta", type=float, help="dipole decay rate (1/ns)")
    a.add_argument("--t2-ns", type=float, help="pure dephasing time, used when --beta is absent")
    a.add_argument("--delta-ueV", type=float, default=0.0)
    a.add_argument("--rho", type=float, default=1.0)
    a.add_argument("--jitter-fwhm-ns", type=float, default=0.0)
    a.add_argument("--compare", action="store_true", help="report the difference between the derived and paper exponent forms")
    a.add_argument("--out")
    a.set_defaults(func=cmd_analytic)

    d = sp.add_parser("device", help="device formulas")
    dsp = d.add_subparsers(dest="device_cmd", required=True)
    gi = dsp.add_parser("group-index")
    gi.add_argument("--lambda", dest="wavelength", type=float)
    gi.add_argument("--l", type=float, required=True, help="waveguide length (um)")
    gi.add_argument("--dlambda", type=float)
    gi.add_argument("--spectrum", help="wavelength_nm,counts fringe CSV")
    pu = dsp.add_parser("purcell")
    pu.add_argument("--q", type=float)
    pu.add_argument("--v", type=float, help="mode volume in (lambda/n)^3")
    pu.add_argument("--field-ratio", type=float, default=1.0)
    pu.add_argument("--rates", type=float, nargs=3, metavar=("GC", "GBULK", "GUC"))
    pu.add_argument("--target", type=float)
    ts = dsp.add_parser("thermal-sweep")
    ts.add_argument("--lambda-a", type=float, default=1314.5)
    ts.add_argument("--lambda-b", type=float, default=1314.3)
    ts.add_argument("--p-max", type=float)
    ts.add_argument("--steps", type=int, default=81)
    ts.add_argument("--crosstalk", type=float)
    ts.add_argument("--thermal-config")
    ts.add_argument("--out")
    ma = dsp.add_parser("match")
    ma.add_argument("--delta-ueV", type=float, required=True)
    ma.add_argument("--crosstalk", type=float)
    ma.add_argument("--thermal-config")
    ef = dsp.add_parser("efficiency")
    ef.add_argument("--stages", required=True, help="comma-separated stage efficiencies")
    ef.add_argument("--pulse-rate-mhz", type=float)
    ef.add_argument("--collection", type=float, default=0.05)
    d.set_defaults(func=cmd_device)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ConfigError, ValueError, KeyError, ZeroDivisionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
