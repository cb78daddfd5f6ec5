"""Spectral line fits, lifetime fits and rate-based Purcell / coupling figures."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks, peak_widths

from ..units import energy_separation, wavelength_shift_to_energy
from .g2fit import FitWarning
from .results import FitResult, fit_model, propagate

OVERLAP_UEV = 10.0


def _read_two_columns(path, header):
    text = Path(path).read_text().strip().splitlines()
    if not text or not text[0].replace(" ", "").startswith(header):
        raise ValueError(f"{path}: expected a '{header}' CSV header")
    rows = [r for r in text[1:] if r and not r.startswith("#")]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.array([[float(x) for x in r.split(",")[:2]] for r in rows]).T


@dataclass(frozen=True)
class Spectrum:
    wavelength: np.ndarray  # nm
    intensity: np.ndarray  # counts
    noise: np.ndarray | None = None

    def __post_init__(self):
        wl = np.asarray(self.wavelength, dtype=float)
        it = np.asarray(self.intensity, dtype=float)
        if wl.shape != it.shape or wl.ndim != 1:
            raise ValueError("wavelength and intensity must be 1-d and equally long")
        if np.any(np.diff(wl) <= 0):
            raise ValueError("wavelength grid must be strictly increasing")
        object.__setattr__(self, "wavelength", wl)
        object.__setattr__(self, "intensity", it)
        if self.noise is not None:
            object.__setattr__(self, "noise", np.asarray(self.noise, dtype=float))

    def scaled(self, factor):
        noise = None if self.noise is None else self.noise * abs(factor)
        return Spectrum(self.wavelength, self.intensity * factor, noise)

    def to_csv(self, path):
        rows = ["wavelength_nm,counts"] + [f"{w!r},{c!r}" for w, c in zip(self.wavelength.tolist(), self.intensity.tolist())]
        Path(path).write_text("\n".join(rows) + "\n")

    @classmethod
    def from_csv(cls, path):
        wl, it = _read_two_columns(path, "wavelength_nm,counts")
        return cls(wl, it)


def lorentzian(x, center, fwhm, amplitude):
    half = 0.5 * fwhm
    return amplitude * half * half / ((x - center) ** 2 + half * half)


def _initial_peaks(x, y, n_peaks):
    base = np.min(y)
    span = np.max(y) - base
    peaks, props = find_peaks(y - base, prominence=0.05 * span if span > 0 else None)
    if peaks.size == 0:
        peaks = np.array([int(np.argmax(y))])
        props = {"prominences": np.array([span])}
    order = np.argsort(props["prominences"])[::-1][:n_peaks]
    peaks = np.sort(peaks[order])
    dx = np.mean(np.diff(x))
    widths = peak_widths(y - base, peaks, rel_height=0.5)[0] * dx
    out = [(x[p], max(w, 2 * dx), y[p] - base) for p, w in zip(peaks, widths)]
    while len(out) < n_peaks:
        # an unresolved extra line: split the strongest one
        c, w, a = max(out, key=lambda t: t[2])
        out.remove((c, w, a))
        out += [(c - w / 4, w / 2, a / 2), (c + w / 4, w / 2, a / 2)]
    return sorted(out), base


def fit_lorentzian(spectrum: Spectrum, n_peaks=1) -> FitResult:
    """Sum of ``n_peaks`` Lorentzians plus a constant baseline.

    Intensities are rescaled to unit peak height before fitting so the result
    does not depend on the overall intensity scale.
    """
    if n_peaks < 1:
        raise ValueError("n_peaks must be at least 1")
    x = spectrum.wavelength
    scale = float(np.max(np.abs(spectrum.intensity))) or 1.0
    y = spectrum.intensity / scale
    sigma = np.ones_like(y) if spectrum.noise is None else spectrum.noise / scale
    peaks, base = _initial_peaks(x, y, n_peaks)
    names, x0, lo, hi = [], [], [], []
    span = x[-1] - x[0]
    for i, (c, w, a) in enumerate(peaks):
        names += [f"center_{i}", f"fwhm_{i}", f"amplitude_{i}"]
        x0 += [c, w, a]
        lo += [x[0] - span, 1e-6 * span, 0.0]
        hi += [x[-1] + span, 10 * span, np.inf]
    names.append("baseline")
    x0.append(base)
    lo.append(-np.inf)
    hi.append(np.inf)

    def predict(p):
        out = np.full_like(x, p["baseline"])
        for i in range(n_peaks):
            out += lorentzian(x, p[f"center_{i}"], p[f"fwhm_{i}"], p[f"amplitude_{i}"])
        return out

    res = fit_model(f"lorentzian-{n_peaks}", names, x0, predict, y, sigma, lo, hi)
    # undo the intensity rescaling
    for i, n in enumerate(res.names):
        if n.startswith("amplitude") or n == "baseline":
            res.values[i] *= scale
            res.sigmas[i] *= scale
    if getattr(res, "covariance", None) is not None:
        sc = np.array([scale if (n.startswith("amplitude") or n == "baseline") else 1.0 for n in res.names])
        res.covariance = res.covariance * np.outer(sc, sc)
    order = sorted(range(n_peaks), key=lambda i: res[f"center_{i}"])
    for i in range(n_peaks):
        c = res[f"center_{i}"]
        res.derived[f"center_{i}_sigma_ueV"] = (wavelength_shift_to_energy(c, res.sigma(f"center_{i}")), 0.0)
    if n_peaks >= 2:
        a, b = order[0], order[1]
        sep = propagate(res, lambda p: energy_separation(p[f"center_{a}"], p[f"center_{b}"]))
        res.derived["separation_ueV"] = sep
        res.derived["separation_nm"] = propagate(res, lambda p: p[f"center_{b}"] - p[f"center_{a}"])
        res.derived["overlapped"] = (float(sep[0] <= OVERLAP_UEV), 0.0)
        d_nm = res["separation_nm"]
        fw = min(res[f"fwhm_{a}"], res[f"fwhm_{b}"])
        if d_nm < 0.5 * fw:
            msg = f"peaks overlap: separation {d_nm:.4g} nm below half the FWHM {fw:.4g} nm"
            warnings.warn(msg, FitWarning, stacklevel=2)
            res.warnings.append(msg)
    if not res.converged:
        res.warnings.append("fit did not converge")
    return res


def classify_overlap(separation_ueV, limit=OVERLAP_UEV):
    return "overlapped" if separation_ueV <= limit else "separated"


def peak_separation(result: FitResult):
    """(separation in ueV, classification) for a two-line fit."""
    sep = result["separation_ueV"]
    return sep, classify_overlap(sep)


# lifetimes

@dataclass(frozen=True)
class DecayCurve:
    time: np.ndarray  # ns
    counts: np.ndarray

    def to_csv(self, path):
        rows = ["t_ns,counts"] + [f"{t!r},{c!r}" for t, c in zip(np.asarray(self.time, float).tolist(), np.asarray(self.counts, float).tolist())]
        Path(path).write_text("\n".join(rows) + "\n")

    @classmethod
    def from_csv(cls, path):
        t, c = _read_two_columns(path, "t_ns,counts")
        return cls(t, c)


def fit_lifetime(time, counts, background=None) -> FitResult:
    """Single exponential A exp(-Gamma (t - t_peak)) + B after the peak.

    The flat background B is the mean of the points before the rise when any
    exist, otherwise it is fitted.
    """
    t = np.asarray(time, dtype=float)
    c = np.asarray(counts, dtype=float)
    if t.size < 4 or t.shape != c.shape:
        raise ValueError("need at least 4 matching time and count samples")
    ip = int(np.argmax(c))
    pre = c[: max(ip - 2, 0)]
    if background is None and pre.size >= 3:
        background = float(pre.mean())
    tail_t, tail_c = t[ip:], c[ip:]
    floor = background if background is not None else float(np.min(tail_c))
    drop = tail_c[0] - floor
    if tail_t.size < 4 or not drop > 1e-9 * max(abs(tail_c[0]), 1e-300):
        raise ValueError("no decay detected")
    # starting rate from the time to fall below 1/e of the peak excess
    below = np.flatnonzero(tail_c - floor < drop / np.e)
    g0 = 1.0 / (tail_t[below[0]] - tail_t[0]) if below.size and below[0] > 0 else 1.0 / (tail_t[-1] - tail_t[0])
    sig = np.sqrt(np.maximum(tail_c, 1.0)) if np.all(c == np.round(c)) else np.ones_like(tail_c)
    names = ["amplitude", "gamma"]
    fixed = {}
    if background is None:
        names.append("background")
    else:
        fixed["background"] = background
    x0 = [drop, g0] + ([floor] if background is None else [])

    def predict(p):
        return p["amplitude"] * np.exp(-p["gamma"] * (tail_t - tail_t[0])) + p["background"]

    res = fit_model("lifetime", names, x0, predict, tail_c, sig,
                    [0.0, 1e-9] + ([-np.inf] if background is None else []), None, fixed)
    if res["gamma"] <= 0:
        raise ValueError("no decay detected")
    res.derived["lifetime_ns"] = propagate(res, lambda p: 1.0 / p["gamma"])
    return res


def purcell_beta(gamma_c, gamma_bulk, gamma_uc):
    """Purcell enhancement Gc/Gbulk and coupling efficiency (Gc - Guc)/Gc."""
    if not (gamma_c > 0 and gamma_bulk > 0 and gamma_uc >= 0):
        raise ValueError("rates must be positive")
    if gamma_uc > gamma_c:
        raise ValueError("uncoupled rate cannot exceed the coupled rate")
    return {"purcell": gamma_c / gamma_bulk, "beta": (gamma_c - gamma_uc) / gamma_c}
