"""Scenario configuration files and the simulate pipeline they drive.

Keys carry their unit as a suffix (``_ns``, ``_per_ns``, ``_ueV``, ``_um``).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .hbt import (DetectorParams, ExcitationSchedule, add_background, background_rate_for_rho,
                  correlate, hbt_detect, simulate_stream)
from .units import EmitterParams, TwoEmitterSystem, WaveguideSystem

SCENARIOS = ("offres", "onres", "dotA_pulsed", "dotB_pulsed")


class ConfigError(ValueError):
    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _num(d, key, where, default=None, positive=False, nonneg=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"{where}.{key}", "required field missing")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}", f"expected a number, got {v!r}")
    v = float(v)
    if math.isnan(v):
        raise ConfigError(f"{where}.{key}", "must not be NaN")
    if positive and not v > 0:
        raise ConfigError(f"{where}.{key}", f"must be positive, got {v}")
    if nonneg and v < 0:
        raise ConfigError(f"{where}.{key}", f"must be nonnegative, got {v}")
    return v


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(where, "expected an object")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(where, f"unknown keys {sorted(extra)}")


def _wrap(where, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(where, str(exc)) from None


_EMITTER_KEYS = ("detuning_ueV", "lifetime_ns", "gamma_per_ns", "beta_factor", "t2_ns", "position_um")


def _emitter(d, where):
    _check_keys(d, _EMITTER_KEYS, where)
    if ("lifetime_ns" in d) == ("gamma_per_ns" in d):
        raise ConfigError(where, "give exactly one of lifetime_ns or gamma_per_ns")
    kw = dict(detuning_ueV=_num(d, "detuning_ueV", where, 0.0),
              beta_factor=_num(d, "beta_factor", where, 1.0),
              t2_ns=_num(d, "t2_ns", where, math.inf, positive=True),
              position_um=_num(d, "position_um", where, 0.0))
    if "lifetime_ns" in d:
        kw["lifetime_ns"] = _num(d, "lifetime_ns", where, positive=True)
    else:
        kw["gamma_per_ns"] = _num(d, "gamma_per_ns", where, positive=True)
    if not 0.0 <= kw["beta_factor"] <= 1.0:
        raise ConfigError(f"{where}.beta_factor", "must lie in [0, 1]")
    return _wrap(where, EmitterParams.from_physical, **kw)


def _detector(d, where):
    _check_keys(d, ("efficiency", "jitter_fwhm_ns", "dark_rate_per_ns", "dark_rate_hz", "dead_time_ns",
                    "preset"), where)
    if d.get("preset") == "ingaas":
        base = DetectorParams.ingaas()
    elif "preset" in d:
        raise ConfigError(f"{where}.preset", f"unknown preset {d['preset']!r}")
    else:
        base = DetectorParams()
    dark = base.dark_rate
    if "dark_rate_hz" in d:
        dark = 1e-9 * _num(d, "dark_rate_hz", where, nonneg=True)
    dark = _num(d, "dark_rate_per_ns", where, dark, nonneg=True)
    return _wrap(where, DetectorParams, _num(d, "efficiency", where, base.efficiency),
                 _num(d, "jitter_fwhm_ns", where, base.jitter_fwhm, nonneg=True), dark,
                 _num(d, "dead_time_ns", where, base.dead_time, nonneg=True))


def _schedule(d, where):
    _check_keys(d, ("mode", "period_ns", "probability", "capture_delay_ns", "repump_per_ns"), where)
    mode = d.get("mode")
    if mode == "pulsed":
        return _wrap(where, ExcitationSchedule.pulsed, _num(d, "period_ns", where, 25.0, positive=True),
                     _num(d, "probability", where, 1.0), _num(d, "capture_delay_ns", where, 0.05, nonneg=True))
    if mode == "cw":
        return _wrap(where, ExcitationSchedule.cw, _num(d, "repump_per_ns", where, positive=True))
    raise ConfigError(f"{where}.mode", f"must be 'pulsed' or 'cw', got {mode!r}")


@dataclass
class RunConfig:
    scenario: str
    system: object
    schedule: ExcitationSchedule
    detectors: tuple
    duration: float
    seed: int
    coupling: str = "collective"
    split_ratio: float = 0.5
    bin_width: float = 0.02
    max_delay: float = 8.0
    background: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)
    output_dir: str | None = None
    raw: dict = field(default_factory=dict)

    @property
    def delta(self):
        em = self.system.emitters
        return em[0].detuning - em[1].detuning if len(em) == 2 else 0.0


_TOP_KEYS = ("scenario", "description", "seed", "emitters", "k_rad_per_um", "coupling", "excitation",
             "duration_ns", "background", "detectors", "split_ratio", "histogram", "fit", "output_dir")


def parse_config(d) -> RunConfig:
    """Validate a config mapping; raises ConfigError naming the offending field."""
    _check_keys(d, _TOP_KEYS, "config")
    em = d.get("emitters")
    if not isinstance(em, list) or not 1 <= len(em) <= 6:
        raise ConfigError("emitters", "expected a list of 1 to 6 emitter objects")
    emitters = [_emitter(e, f"emitters[{i}]") for i, e in enumerate(em)]
    k = _num(d, "k_rad_per_um", "config", 0.0)
    system = TwoEmitterSystem(emitters[0], emitters[1], k) if len(emitters) == 2 else WaveguideSystem(tuple(emitters), k)
    if "excitation" not in d:
        raise ConfigError("excitation", "required field missing")
    schedule = _schedule(d["excitation"], "excitation")
    dets = d.get("detectors", {})
    _check_keys(dets, ("a", "b"), "detectors")
    detectors = (_detector(dets.get("a", {}), "detectors.a"), _detector(dets.get("b", {}), "detectors.b"))
    coupling = d.get("coupling", "collective")
    if coupling not in ("collective", "independent"):
        raise ConfigError("coupling", f"must be 'collective' or 'independent', got {coupling!r}")
    seed = d.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", f"expected a nonnegative integer, got {seed!r}")
    split = _num(d, "split_ratio", "config", 0.5)
    if not 0 < split < 1:
        raise ConfigError("split_ratio", "must lie in (0, 1)")
    hist = d.get("histogram", {})
    _check_keys(hist, ("bin_width_ns", "max_delay_ns"), "histogram")
    bg = d.get("background", {})
    _check_keys(bg, ("rho", "rate_per_ns", "pulsed_fraction", "decay_ns"), "background")
    for key in bg:
        _num(bg, key, "background", nonneg=True)
    if "rho" in bg and not 0 < bg["rho"] <= 1:
        raise ConfigError("background.rho", "must lie in (0, 1]")
    if "pulsed_fraction" in bg and schedule.mode != "pulsed":
        raise ConfigError("background.pulsed_fraction", "only valid with pulsed excitation")
    fit = d.get("fit", {})
    _check_keys(fit, ("model", "exponent_form", "free", "initial", "period_ns"), "fit")
    return RunConfig(
        scenario=str(d.get("scenario", "custom")), system=system, schedule=schedule, detectors=detectors,
        duration=_num(d, "duration_ns", "config", positive=True), seed=seed, coupling=coupling,
        split_ratio=split, bin_width=_num(hist, "bin_width_ns", "histogram", 0.02, positive=True),
        max_delay=_num(hist, "max_delay_ns", "histogram", 8.0, positive=True), background=dict(bg),
        fit=dict(fit), output_dir=d.get("output_dir"), raw=dict(d))


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"not valid JSON ({exc})") from None
    return parse_config(data)


def bundled_scenario(name) -> dict:
    if name not in SCENARIOS:
        raise ConfigError("scenario", f"unknown bundled scenario {name!r}; choose from {SCENARIOS}")
    return json.loads(resources.files("wgqed.scenarios").joinpath(f"{name}.json").read_text())


def resolve_config(arg, duration=None, seed=None) -> RunConfig:
    """Config from a file path or a bundled scenario name, with CLI overrides."""
    if arg in SCENARIOS and not Path(arg).exists():
        data = bundled_scenario(arg)
    else:
        p = Path(arg)
        if not p.exists():
            raise ConfigError("config", f"no such file or bundled scenario: {arg}")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(str(p), f"not valid JSON ({exc})") from None
    if duration is not None:
        data["duration_ns"] = duration
    if seed is not None:
        data["seed"] = seed
    return parse_config(data)


@dataclass
class RunOutput:
    stream: object
    clicks: tuple
    histogram: object
    signal_rate: float


def run_simulation(cfg: RunConfig) -> RunOutput:
    """simulate_stream -> background -> hbt_detect -> correlate."""
    stream = simulate_stream(cfg.system, cfg.schedule, cfg.duration, cfg.seed, coupling=cfg.coupling)
    signal = stream.count("waveguide") / stream.duration
    bg = cfg.background
    rate = float(bg.get("rate_per_ns", 0.0))
    if "rho" in bg:
        rate += background_rate_for_rho(signal, float(bg["rho"]))
    pulsed = None
    if bg.get("pulsed_fraction"):
        per_pulse = signal * cfg.schedule.period
        pulsed = {"period": cfg.schedule.period, "mean_per_pulse": float(bg["pulsed_fraction"]) * per_pulse,
                  "decay_ns": float(bg.get("decay_ns", 1.0))}
    stream = add_background(stream, cfg.seed, rate=rate, pulsed=pulsed)
    a, b = hbt_detect(stream, cfg.detectors[0], cfg.detectors[1], cfg.split_ratio, cfg.seed)
    hist = correlate(a, b, cfg.bin_width, cfg.max_delay)
    meta = {"scenario": cfg.scenario, "seed": cfg.seed, "mode": cfg.schedule.mode,
            "signal_rate_per_ns": signal, "fit": cfg.fit}
    if cfg.schedule.mode == "pulsed":
        meta["period_ns"] = cfg.schedule.period
    else:
        meta["delta_rad_per_ns"] = cfg.delta
        # each detector jitters independently: the delay response adds in quadrature
        meta["jitter_fwhm_ns"] = math.hypot(cfg.detectors[0].jitter_fwhm, cfg.detectors[1].jitter_fwhm)
    hist = hist.with_counts(hist.counts, metadata=meta)
    return RunOutput(stream, (a, b), hist, signal)

