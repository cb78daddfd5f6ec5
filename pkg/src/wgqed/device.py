"""Device-level formulas: group index from fringes, Purcell factor, efficiency
chain and the lumped thermal tuning model."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import savgol_filter

from .units import energy_to_wavelength, wavelength_to_energy

CHIRP_WARN = 0.10


class DeviceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class WaveguideGeometry:
    length: float  # um
    index: float = 3.4
    band_edge: float | None = None  # nm

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("waveguide length must be positive")
        if not self.index > 1:
            raise ValueError("refractive index must exceed 1")


def group_index(wavelength_nm, length_um, spacing_nm):
    """n_g = lambda^2 / (2 l dlambda), with l converted to nm."""
    if spacing_nm == 0:
        raise ZeroDivisionError("fringe spacing is zero")
    if not (wavelength_nm > 0 and length_um > 0 and spacing_nm > 0):
        raise ValueError("wavelength, length and spacing must be positive")
    return wavelength_nm ** 2 / (2.0 * length_um * 1e3 * spacing_nm)


def fringe_period(wavelength_nm, length_um, n_group):
    """Fabry-Perot fringe spacing (nm) for a given group index."""
    return wavelength_nm ** 2 / (2.0 * length_um * 1e3 * n_group)


def synthetic_fringes(start_nm, stop_nm, n_group, length_um, n_points=2001, contrast=0.5,
                      dispersion=0.0, noise=0.0, seed=0):
    """Transmission-like fringe spectrum with phase 2 n_g l (2 pi / lambda).

    ``dispersion`` makes the group index vary linearly across the window
    (relative change end to end), producing a chirped fringe.
    """
    wl = np.linspace(start_nm, stop_nm, n_points)
    mid = 0.5 * (start_nm + stop_nm)
    ng = n_group * (1.0 + dispersion * (wl - mid) / (stop_nm - start_nm))
    # integrate d(phase)/d(lambda) = -4 pi n_g l / lambda^2 so local spacing follows n_g
    dphi = -4.0 * math.pi * ng * length_um * 1e3 / wl ** 2
    phase = np.concatenate([[0.0], np.cumsum(0.5 * (dphi[1:] + dphi[:-1]) * np.diff(wl))])
    y = 1.0 + contrast * np.cos(phase)
    if noise:
        y = y + np.random.default_rng(seed).normal(0.0, noise, y.size)
    return wl, y


@dataclass
class FringeResult:
    spacing: float  # nm
    sigma: float
    center: float  # nm, where the spacing applies
    maxima: np.ndarray
    chirp: float  # relative spacing change across the window
    warnings: list


def fringe_spacing(wavelength, intensity, window=5) -> FringeResult:
    """Mean spacing of fringe maxima after Savitzky-Golay smoothing.

    Maxima are strict local maxima refined by a parabola through their
    neighbours. When the spacing drifts by more than 10 % across the window
    a warning is issued and the spacing from a linear trend is evaluated at
    the window centre.
    """
    wl = np.asarray(wavelength, dtype=float)
    y = np.asarray(intensity, dtype=float)
    if wl.size < max(window, 3) or np.any(np.diff(wl) <= 0):
        raise ValueError("need an increasing wavelength grid longer than the smoothing window")
    ys = savgol_filter(y, window, 2) if window >= 3 else y
    i = np.flatnonzero((ys[1:-1] > ys[:-2]) & (ys[1:-1] > ys[2:])) + 1
    if i.size < 3:
        raise ValueError(f"need at least 3 fringe maxima, found {i.size}")
    y0, y1, y2 = ys[i - 1], ys[i], ys[i + 1]
    denom = y0 - 2 * y1 + y2
    shift = np.where(denom != 0, 0.5 * (y0 - y2) / np.where(denom != 0, denom, 1.0), 0.0)
    dx = np.interp(i + shift, np.arange(wl.size), wl)
    sp = np.diff(dx)
    mids = 0.5 * (dx[1:] + dx[:-1])
    centre = 0.5 * (wl[0] + wl[-1])
    warn = []
    chirp = 0.0
    spacing = float(sp.mean())
    if sp.size >= 3:
        slope, icpt = np.polyfit(mids, sp, 1)
        chirp = float(abs(slope) * (mids[-1] - mids[0]) / spacing)
        if chirp > CHIRP_WARN:
            spacing = float(slope * centre + icpt)
            msg = f"fringe spacing changes by {100 * chirp:.0f}% across the window; value at {centre:.2f} nm"
            warnings.warn(msg, DeviceWarning, stacklevel=2)
            warn.append(msg)
    sigma = float(sp.std(ddof=1)) if sp.size > 1 else 0.0
    return FringeResult(spacing, sigma, centre, dx, chirp, warn)


def group_index_from_spectrum(wavelength, intensity, length_um, window=5):
    fr = fringe_spacing(wavelength, intensity, window)
    return group_index(fr.center, length_um, fr.spacing), fr


def purcell_formula(q_factor, mode_volume, field_ratio=1.0, wavelength_nm=None, index=None):
    """Purcell factor 3 Q / (4 pi^2 V') times the squared field ratio.

    ``mode_volume`` is in (lambda/n)^3 units unless ``wavelength_nm`` and
    ``index`` are given, in which case it is read as um^3.
    """
    if not (q_factor > 0 and mode_volume > 0):
        raise ValueError("Q and V must be positive")
    if not 0.0 <= field_ratio <= 1.0:
        raise ValueError("field ratio must lie in [0, 1]")
    v = mode_volume
    if wavelength_nm is not None:
        if index is None:
            raise ValueError("index is needed to convert an absolute volume")
        v = mode_volume / (wavelength_nm * 1e-3 / index) ** 3
    return 3.0 * q_factor / (4.0 * math.pi ** 2 * v) * field_ratio ** 2


def q_over_v_for(purcell):
    """Q/V' that gives the requested Purcell factor at maximum field."""
    return purcell * 4.0 * math.pi ** 2 / 3.0


# efficiency budget

@dataclass(frozen=True)
class EfficiencyChain:
    stages: tuple  # (name, efficiency) pairs

    def __post_init__(self):
        st = tuple((str(n), float(e)) for n, e in self.stages)
        if not st:
            raise ValueError("efficiency chain is empty")
        for n, e in st:
            if not 0.0 < e <= 1.0:
                raise ValueError(f"stage {n!r}: efficiency must lie in (0, 1], got {e}")
        object.__setattr__(self, "stages", st)

    @classmethod
    def from_values(cls, values):
        return cls(tuple((f"stage{i}", v) for i, v in enumerate(values)))

    @classmethod
    def methods_default(cls):
        return cls((("optics", 0.40), ("spectrometer", 0.40), ("fiber_coupling", 0.53),
                    ("detector", 0.20)))

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d.items()))


def chain_efficiency(chain) -> float:
    if not isinstance(chain, EfficiencyChain):
        chain = EfficiencyChain.from_values(list(chain))
    return float(math.prod(e for _, e in chain.stages))


def count_rate(pulse_rate_hz, collection, chain):
    """Detected counts per second for a given per-pulse collection efficiency."""
    return pulse_rate_hz * collection * chain_efficiency(chain)


# thermal tuning

@dataclass(frozen=True)
class ThermalModel:
    """Quadratic energy shift a (T - T0)^2 driven by a linear heater law T0 + s P.

    Defaults: 610 ueV at 26 K from 4 K, and 15 K at 200 uW.
    """

    t0: float = 4.0
    a: float = 610.0 / 22.0 ** 2
    slope: float = 11.0 / 200.0
    t_max: float = 26.0
    crosstalk: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.slope > 0 and self.t0 >= 0):
            raise ValueError("need a > 0, s > 0 and T0 >= 0")
        if not self.t_max > self.t0:
            raise ValueError("validity ceiling must exceed the base temperature")
        if not 0.0 <= self.crosstalk <= 1.0:
            raise ValueError("crosstalk fraction must lie in [0, 1]")

    @classmethod
    def from_dict(cls, d):
        keys = {"t0_K": "t0", "a_ueV_per_K2": "a", "slope_K_per_uW": "slope", "t_max_K": "t_max",
                "crosstalk_fraction": "crosstalk"}
        unknown = set(d) - set(keys)
        if unknown:
            raise ValueError(f"unknown thermal model keys {sorted(unknown)}")
        return cls(**{keys[k]: float(v) for k, v in d.items()})

    @property
    def max_power(self):
        return (self.t_max - self.t0) / self.slope


def thermal_shift(temperature, model: ThermalModel = ThermalModel()):
    """Energy red shift (ueV) at temperature T (K)."""
    tol = 1e-9 * model.t_max
    if not model.t0 - tol <= temperature <= model.t_max + tol:
        raise ValueError(f"T = {temperature} K outside the model range [{model.t0}, {model.t_max}] K")
    return model.a * (temperature - model.t0) ** 2


def power_to_temperature(power_uW, model: ThermalModel = ThermalModel()):
    if power_uW < 0:
        raise ValueError("heater power must be nonnegative")
    return model.t0 + model.slope * power_uW


def match_resonance(delta_e_ueV, model: ThermalModel = ThermalModel(), tol=0.01):
    """Heater power (uW) that shifts the heated emitter by ``delta_e_ueV``, by bisection."""
    if delta_e_ueV < 0:
        raise ValueError("target shift must be nonnegative")
    hi = model.max_power
    if delta_e_ueV > thermal_shift(model.t_max, model) * (1 + 1e-12):
        raise ValueError(f"shift of {delta_e_ueV} ueV is not reachable below {model.t_max} K")
    lo = 0.0

    def f(p):
        return thermal_shift(min(power_to_temperature(p, model), model.t_max), model) - delta_e_ueV

    if f(lo) >= 0:
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def shifted_wavelength(wavelength_nm, shift_ueV):
    """Wavelength after a red shift of the photon energy by ``shift_ueV``."""
    return energy_to_wavelength(wavelength_to_energy(wavelength_nm) - 1e-3 * shift_ueV)


def thermal_sweep(powers_uW, lambda_a_nm, lambda_b_nm, model: ThermalModel = ThermalModel()):
    """Rows (P, lambda_A, lambda_B) with the heater on emitter B's segment.

    Emitter A sees the fraction ``model.crosstalk`` of the temperature rise.
    """
    rows = []
    for p in powers_uW:
        tb = power_to_temperature(p, model)
        ta = model.t0 + model.crosstalk * (tb - model.t0)
        rows.append((float(p), shifted_wavelength(lambda_a_nm, thermal_shift(ta, model)),
                     shifted_wavelength(lambda_b_nm, thermal_shift(tb, model))))
    return rows


def write_sweep_csv(path, rows):
    lines = ["power_uW,lambdaA_nm,lambdaB_nm"] + [f"{p:.6g},{a:.6f},{b:.6f}" for p, a, b in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def crossing_power(lambda_a_nm, lambda_b_nm, model: ThermalModel = ThermalModel()):
    """Power at which a bluer emitter B is tuned onto emitter A (no crosstalk assumed)."""
    delta = 1e3 * (wavelength_to_energy(lambda_b_nm) - wavelength_to_energy(lambda_a_nm))
    if delta < 0:
        raise ValueError("heating can only red shift: emitter B must be the bluer one")
    return match_resonance(delta, model)
