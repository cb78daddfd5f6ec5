"""Dark-count correction and g2 histogram fits."""
from __future__ import annotations

import math
import warnings

import numpy as np

from ..analytic import FWHM_PER_SIGMA, g2_observed, zero_delay_resolved
from ..hbt.histogram import CorrelationHistogram
from .results import FitResult, fit_model, propagate

SUBSAMPLES = 5
IDENTIFIABILITY_LIMIT = 3.0  # delta*sigma beyond which the beat note is washed out


class FitWarning(UserWarning):
    pass


def _rates(hist, dark_rates, singles_rates):
    if singles_rates is None:
        singles_rates = (hist.rate_a, hist.rate_b)
    if dark_rates is None:
        dark_rates = (hist.dark_a, hist.dark_b)
    vals = [*singles_rates, *dark_rates]
    if any(v is None or not np.isfinite(v) for v in vals) or not hist.acquisition_time > 0:
        raise ValueError("dark subtraction needs singles rates, dark rates and acquisition time")
    return singles_rates, dark_rates


def dark_floor(hist: CorrelationHistogram, dark_rates=None, singles_rates=None):
    """Expected per-bin coincidences involving at least one dark count.

    With measured singles R_i and dark rates d_i the photon rates are
    r_i = R_i - d_i and the floor is (r_A d_B + r_B d_A + d_A d_B) w T.
    """
    (ra, rb), (da, db) = _rates(hist, dark_rates, singles_rates)
    sa, sb = max(ra - da, 0.0), max(rb - db, 0.0)
    return (sa * db + sb * da + da * db) * hist.bin_width * hist.acquisition_time


def subtract_dark(hist: CorrelationHistogram, dark_rates=None, singles_rates=None, clamp=True):
    """Histogram with the dark-count floor removed (clamped at zero by default)."""
    level = dark_floor(hist, dark_rates, singles_rates)
    counts = hist.counts - level
    if clamp:
        counts = np.maximum(counts, 0.0)
    elif np.any(counts < 0):
        raise ValueError("unclamped subtraction went negative; use dark_residual")
    return hist.with_counts(counts, floor=hist.floor + level)


def dark_residual(hist, dark_rates=None, singles_rates=None):
    """Raw counts minus the dark floor, without clamping."""
    return hist.counts - dark_floor(hist, dark_rates, singles_rates)


def normalized_floor(hist, dark_rates=None, singles_rates=None):
    return dark_floor(hist, dark_rates, singles_rates) / hist.accidental_level()


def _subbin(tau, width, n=SUBSAMPLES):
    off = (np.arange(n) + 0.5) / n - 0.5
    return tau[:, None] + width * off[None, :]


# pulsed excitation

def _peak_indices(tmax, period, decay):
    reach = tmax + 10.0 * decay
    nmax = int(math.floor(reach / period))
    return np.arange(-nmax, nmax + 1)


def pulsed_model(tau, a0, a, decay, period):
    ns = _peak_indices(np.max(np.abs(tau)), period, decay)
    amp = np.where(ns == 0, a0, a)
    return (amp[None, :] * np.exp(-np.abs(tau[:, None] - ns[None, :] * period) / decay)).sum(axis=1)


def _centroid_period(tau, counts, period):
    ns, cs = [], []
    for n in range(1, int(np.max(tau) / period) + 1):
        for sgn in (-1, 1):
            m = np.abs(tau - sgn * n * period) < 0.4 * period
            if counts[m].sum() > 0:
                ns.append(sgn * n)
                cs.append(np.sum(tau[m] * counts[m]) / counts[m].sum())
    if len(ns) < 2:
        return period
    return float(np.polyfit(ns, cs, 1)[0])


def fit_pulsed_g2(hist: CorrelationHistogram, period=25.0, fit_period=True) -> FitResult:
    """Two-sided exponential peak train; g2_0 is the centre-to-side amplitude ratio."""
    tau, c = hist.centers, hist.counts
    n_side = int(np.count_nonzero(np.abs(np.arange(-40, 41)) * period <= np.max(np.abs(tau)))) - 1
    if n_side < 5:
        raise ValueError(f"need at least 5 side peaks in the window, found {n_side}")
    period0 = _centroid_period(tau, c, period)
    side = np.abs(np.abs(tau) - period0) < 0.5 * period0
    a_guess = max(np.max(c[side]) if side.any() else 1.0, 1.0)
    area = c[np.abs(tau - period0) < 0.5 * period0].sum() * hist.bin_width
    decay0 = float(np.clip(area / (2 * a_guess), 2 * hist.bin_width, period0 / 4))
    centre = np.abs(tau) < 0.5 * period0
    ratio0 = c[centre].sum() / max(c[np.abs(tau - period0) < 0.5 * period0].sum(), 1.0)
    sub = _subbin(tau, hist.bin_width)

    def predict(p):
        return pulsed_model(sub.ravel(), p["A0"], p["A"], p["tau_d"], p["period"]).reshape(sub.shape).mean(1)

    names = ["A0", "A", "tau_d"] + (["period"] if fit_period else [])
    x0 = [ratio0 * a_guess, a_guess, decay0] + ([period0] if fit_period else [])
    lower = [0.0, 0.0, 1e-3] + ([0.5 * period] if fit_period else [])
    upper = [np.inf, np.inf, period] + ([1.5 * period] if fit_period else [])
    fixed = {} if fit_period else {"period": period}
    res = fit_model("pulsed", names, x0, predict, c, np.sqrt(np.maximum(c, 1.0)), lower, upper, fixed)
    res.derived["g2_0"] = propagate(res, lambda p: p["A0"] / p["A"])
    res.derived["peak_spacing"] = (res["period"], res.sigma("period"))
    if not res.converged:
        res.warnings.append("fit did not converge; partial result returned")
    return res


# cw excitation

CW_PARAMS = ("gamma", "beta", "delta", "rho", "jitter", "norm")


def cw_fit_options(hist: CorrelationHistogram):
    """(exponent_form, free, initial) from the ``fit`` block stored with a simulated histogram."""
    meta = hist.metadata or {}
    fit = meta.get("fit") or {}
    init = fit.get("initial") or {}
    initial = {"gamma": init.get("gamma_per_ns", 1.0), "beta": init.get("beta_per_ns", 3.0),
               "rho": init.get("rho", 0.9), "norm": 1.0,
               "delta": meta.get("delta_rad_per_ns", 0.0), "jitter": meta.get("jitter_fwhm_ns", 0.0)}
    free = tuple(fit.get("free", ("gamma", "beta", "rho", "norm")))
    return fit.get("exponent_form", "derived"), free, initial


def fit_cw_g2(hist: CorrelationHistogram, exponent_form="derived", free=("gamma", "beta", "rho", "norm"),
              initial=None, max_delay=None) -> FitResult:
    """Fit the background-mixed, jitter-convolved two-emitter model.

    ``initial`` supplies starting values for free parameters and the values
    of fixed ones; missing delta and jitter come from the histogram metadata
    (``delta_rad_per_ns``, ``jitter_fwhm_ns``), other entries get defaults.
    ``norm`` rescales the singles-based normalization.
    """
    meta = hist.metadata or {}
    init = {"gamma": 1.0, "beta": 2.0, "delta": float(meta.get("delta_rad_per_ns", 0.0)), "rho": 0.9,
            "jitter": float(meta.get("jitter_fwhm_ns", 0.0)), "norm": 1.0}
    init.update(initial or {})
    unknown = set(free) - set(CW_PARAMS)
    if unknown:
        raise ValueError(f"unknown parameters {sorted(unknown)}")
    free = [n for n in CW_PARAMS if n in free]
    sigma_j = init["jitter"] / FWHM_PER_SIGMA
    warn = []
    if abs(init["delta"]) * sigma_j > IDENTIFIABILITY_LIMIT and ("beta" in free or "delta" in free):
        msg = (f"delta*sigma = {abs(init['delta']) * sigma_j:.1f}: the beat note is averaged out, "
               "beta and delta are not identifiable and are held fixed")
        warnings.warn(msg, FitWarning, stacklevel=2)
        warn.append(msg)
        free = [n for n in free if n not in ("beta", "delta")]

    tau, c = hist.centers, hist.counts
    keep = np.ones(tau.size, bool) if max_delay is None else np.abs(tau) <= max_delay
    tau, c = tau[keep], c[keep]
    level = hist.accidental_level()
    y = c / level
    sig = np.sqrt(np.maximum(c, 1.0)) / level
    sub = _subbin(tau, hist.bin_width)

    def predict(p):
        g = g2_observed(sub.ravel(), p["gamma"], p["beta"], p["delta"], p["rho"], p["jitter"],
                        exponent_form)
        return p["norm"] * g.reshape(sub.shape).mean(axis=1)

    bounds = {"gamma": (1e-3, 1e3), "beta": (1e-3, 1e4), "delta": (-1e4, 1e4), "rho": (0.0, 1.0),
              "jitter": (0.0, 10.0), "norm": (0.0, 10.0)}
    fixed = {n: init[n] for n in CW_PARAMS if n not in free}
    res = fit_model(f"cw-{exponent_form}", free, [init[n] for n in free], predict, y, sig,
                    [bounds[n][0] for n in free], [bounds[n][1] for n in free], fixed)
    res.warnings.extend(warn)
    if not res.converged:
        res.warnings.append("fit did not converge")
    res.derived["g2_0"] = propagate(res, lambda p: zero_delay_resolved(p["delta"], p["rho"], p["jitter"]))

    def at_zero(jitter_key):
        def f(p):
            jit = p["jitter"] if jitter_key else 0.0
            return float(g2_observed(np.zeros(1), p["gamma"], p["beta"], p["delta"], p["rho"], jit,
                                     exponent_form)[0])
        return f

    res.derived["g2_0_intrinsic"] = propagate(res, at_zero(False))
    res.derived["g2_0_convolved"] = propagate(res, at_zero(True))
    res.derived["coherence_time_inv_beta"] = propagate(res, lambda p: 1.0 / p["beta"])
    res.derived["coherence_time_inv_2beta"] = propagate(res, lambda p: 0.5 / p["beta"])
    res.derived["dip_width"] = propagate(res, lambda p: 1.0 / p["gamma"])
    return res
