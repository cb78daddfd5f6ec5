"""Closed-form correlation functions for two emitters on a common waveguide.

The interference term between the emitters decays as exp(-2*beta*tau) when
the single-emitter first-order solutions are multiplied out ("derived" form);
the normalized expression quoted in the literature prints exp(-beta*tau)
("paper" form). Both are available through ``exponent_form``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.special import wofz

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))  # 2.3548

FORMS = ("derived-exponent", "paper-exponent", "distinguishable-limit",
         "indistinguishable-limit", "lindblad-oracle")
_EXPONENT_FORMS = {"derived": "derived-exponent", "paper": "paper-exponent"}


def jitter_sigma(fwhm):
    return fwhm / FWHM_PER_SIGMA


@dataclass(frozen=True)
class G2Curve:
    tau: np.ndarray
    values: np.ndarray
    form: str = "derived-exponent"

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if tau.shape != values.shape or tau.ndim != 1:
            raise ValueError("tau and values must be 1-d arrays of equal length")
        if self.form not in FORMS:
            raise ValueError(f"unknown form tag {self.form!r}")
        if np.any(values < -1e-9):
            raise ValueError("g2 values must be nonnegative")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "values", values)

    def to_csv(self, path=None):
        buf = io.StringIO()
        buf.write(f"# form={self.form}\n")
        buf.write("tau_ns,g2\n")
        for t, v in zip(self.tau.tolist(), self.values.tolist()):
            buf.write(f"{t!r},{v!r}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text):
        text = str(path_or_text)
        if "\n" not in text:
            text = Path(text).read_text()
        form = "derived-exponent"
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line[1:].strip().startswith("form="):
                    form = line[1:].strip()[5:].strip()
                continue
            if line.startswith("tau_ns"):
                continue
            t, v = line.split(",")
            rows.append((float(t), float(v)))
        arr = np.array(rows, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], form)


@dataclass(frozen=True)
class BackgroundModel:
    """Uncorrelated Poissonian background; rho is the signal fraction of the counts."""

    rho: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")

    def apply(self, g2):
        return apply_background(g2, self.rho)

    @classmethod
    def for_target(cls, g2_ideal, g2_observed):
        """Signal fraction that maps an ideal zero-delay value onto an observed one."""
        if g2_ideal == 1.0:
            raise ValueError("g2_ideal = 1 is a fixed point of the background map")
        rho2 = (g2_observed - 1.0) / (g2_ideal - 1.0)
        if not 0.0 <= rho2 <= 1.0:
            raise ValueError("target not reachable with a Poissonian background")
        return cls(math.sqrt(rho2))


def _emitter_pair(system):
    a, b = system.emitters[0], system.emitters[1]
    return a, b


def g1_solution(system, tau):
    """First-order correlations G(tau) and R(tau) for both emitters, per unit G(0).

    Returns ``(G, R)``, each complex with shape ``(2, len(tau))``; row 0 is
    emitter a, row 1 emitter b. G = exp(-i*Delta*tau - beta*tau) solves
    dG/dtau = -(i*Delta + beta)*G and R is its conjugate-frequency partner.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau < 0):
        raise ValueError("g1_solution is defined for tau >= 0")
    G = np.empty((2, tau.size), dtype=complex)
    R = np.empty_like(G)
    for i, e in enumerate(_emitter_pair(system)):
        envelope = np.exp(-e.coherence_rate * tau)
        G[i] = np.exp(-1j * e.detuning * tau) * envelope
        R[i] = np.exp(1j * e.detuning * tau) * envelope
    return G, R


def _component(c, tau):
    return np.asarray(c(tau) if callable(c) else c, dtype=float)


def g2_unnormalized(system, g2_a, g2_b, tau, g1_zero=(1.0, 1.0)):
    """Un-normalized G2(tau) of the summed output field, term by term.

    ``g2_a``/``g2_b`` are the single-emitter second-order functions (callable
    or array over ``tau``); ``g1_zero`` holds G_a(0), G_b(0).
    """
    tau = np.atleast_1d(np.abs(np.asarray(tau, dtype=float)))
    ga0, gb0 = g1_zero
    G, R = g1_solution(system, tau)
    cross = ga0 * gb0 * (G[0] * R[1] + G[1] * R[0])
    return _component(g2_a, tau) + _component(g2_b, tau) + 2.0 * ga0 * gb0 + cross.real


def g2_closed_form_unnormalized(system, g2_a, g2_b, tau, g1_zero=(1.0, 1.0)):
    """Same quantity with the cross terms collapsed into 2cos(Delta tau)exp(-2 beta tau) G_a(0) G_b(0)."""
    tau = np.atleast_1d(np.abs(np.asarray(tau, dtype=float)))
    ga0, gb0 = g1_zero
    beat = 2.0 * np.cos(system.delta * tau) * np.exp(-2.0 * system.beta * tau)
    return _component(g2_a, tau) + _component(g2_b, tau) + 2.0 * ga0 * gb0 + beat * ga0 * gb0


def _interference_rate(beta, exponent_form):
    if exponent_form == "derived":
        return 2.0 * beta
    if exponent_form == "paper":
        return beta
    raise ValueError(f"exponent_form must be 'derived' or 'paper', got {exponent_form!r}")


def g2_model(tau, gamma, beta, delta, exponent_form="derived"):
    """Normalized two-emitter g2 for explicit rates; even in tau."""
    t = np.abs(np.asarray(tau, dtype=float))
    rate = _interference_rate(beta, exponent_form)
    return 0.5 * (2.0 + np.cos(delta * t) * np.exp(-rate * t) - np.exp(-gamma * t))


def g2_two_emitter(system, tau, exponent_form="derived"):
    """Normalized g2 of the waveguide output for equal emission intensities.

    Negative delays are mapped to |tau| (the CW process is stationary).
    """
    t = np.abs(np.asarray(tau, dtype=float))
    a, b = _emitter_pair(system)
    if exponent_form == "derived":
        interference = np.exp(-(a.coherence_rate + b.coherence_rate) * t)
    else:
        _interference_rate(1.0, exponent_form)
        interference = np.exp(-system.beta * t)
    dip = 0.5 * (np.exp(-a.gamma * t) + np.exp(-b.gamma * t))
    return 0.5 * (2.0 + np.cos(system.delta * t) * interference - dip)


def g2_distinguishable(gamma, tau):
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return 0.5 * (2.0 - np.exp(-gamma * np.abs(np.asarray(tau, dtype=float))))


def g2_indistinguishable(gamma, beta, tau, exponent_form="derived"):
    return g2_model(tau, gamma, beta, 0.0, exponent_form)


def g2_curve(system, tau, exponent_form="derived"):
    return G2Curve(np.asarray(tau, dtype=float), g2_two_emitter(system, tau, exponent_form),
                   _EXPONENT_FORMS[exponent_form])


def apply_background(g2_ideal, rho):
    """Mix in an uncorrelated background: 1 + rho^2 (g2 - 1)."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    return 1.0 + rho * rho * (np.asarray(g2_ideal, dtype=float) - 1.0)


def visibility(g_on0, g_off0):
    if g_off0 == 0:
        raise ZeroDivisionError("visibility undefined for g_off(0) = 0")
    return (g_on0 - g_off0) / g_off0


def beat_suppression(delta, jitter_fwhm):
    """Gaussian-jitter average of cos(delta*t): exp(-(delta*sigma)^2/2)."""
    s = jitter_sigma(jitter_fwhm)
    return math.exp(-0.5 * (delta * s) ** 2)


def convolve_response(curve: G2Curve, jitter_fwhm, rate_weights=None) -> G2Curve:
    """Smear a g2 curve with a Gaussian timing response.

    The curve must be on a uniform grid; a grid starting at tau = 0 is
    mirrored using evenness. With ``rate_weights`` the weighted average
    conv(w*g)/conv(w) is returned, which keeps the far-wing value fixed.
    """
    if jitter_fwhm < 0:
        raise ValueError("jitter_fwhm must be nonnegative")
    if jitter_fwhm == 0:
        return G2Curve(curve.tau.copy(), curve.values.copy(), curve.form)
    tau, values = curve.tau, curve.values
    steps = np.diff(tau)
    if tau.size < 2 or not np.allclose(steps, steps[0], rtol=1e-6, atol=1e-12):
        raise ValueError("convolve_response needs a uniform tau grid")
    step = steps[0]
    sigma = jitter_sigma(jitter_fwhm)
    if step > 0.5 * sigma:
        raise ValueError(f"curve undersampled: step {step} ns > sigma/2 = {0.5 * sigma} ns")
    w = np.ones_like(values) if rate_weights is None else np.asarray(rate_weights, float)
    mirrored = abs(tau[0]) < 1e-12 * max(1.0, abs(tau[-1]))
    if mirrored:
        values = np.concatenate([values[:0:-1], values])
        w = np.concatenate([w[:0:-1], w])
    s = sigma / step
    num = gaussian_filter1d(w * values, s, mode="nearest", truncate=8.0)
    den = gaussian_filter1d(w, s, mode="nearest", truncate=8.0)
    out = num / den
    if mirrored:
        out = out[tau.size - 1:]
    return G2Curve(curve.tau.copy(), np.clip(out, 0.0, None), curve.form)


_SQRT2 = math.sqrt(2.0)


def _emg_half(a, tau, sigma):
    z = (a * sigma * sigma - tau) / (sigma * _SQRT2)
    gauss = np.exp(-tau * tau / (2.0 * sigma * sigma))
    pos = z.real >= 0
    out = np.empty(np.broadcast(z, tau).shape, dtype=complex)
    out[pos] = 0.5 * gauss[pos] * wofz(1j * z[pos])
    neg = ~pos
    if np.any(neg):
        expo = np.clip((a * a * sigma * sigma / 2.0 - a * tau[neg]).real, -745.0, 700.0) \
            + 1j * (a * a * sigma * sigma / 2.0 - a * tau[neg]).imag
        out[neg] = np.exp(expo) - 0.5 * gauss[neg] * wofz(-1j * z[neg])
    return out


def gaussian_smeared_exponential(rate, tau, jitter_fwhm):
    """Exact Gaussian convolution of exp(-rate*|tau|) for complex rate with Re > 0.

    The real part of the result for rate = b + i*delta is the smeared
    exp(-b|tau|)cos(delta*tau).
    """
    tau = np.asarray(tau, dtype=float)
    a = complex(rate)
    if jitter_fwhm == 0:
        return np.exp(-a * np.abs(tau))
    sigma = jitter_sigma(jitter_fwhm)
    flat = np.atleast_1d(tau).astype(float)
    out = _emg_half(a, flat, sigma) + _emg_half(a, -flat, sigma)
    return out.reshape(tau.shape)


def g2_observed(tau, gamma, beta, delta, rho=1.0, jitter_fwhm=0.0, exponent_form="derived"):
    """Two-emitter g2 after background mixing and Gaussian detector response."""
    rate = _interference_rate(beta, exponent_form)
    interference = gaussian_smeared_exponential(rate + 1j * delta, tau, jitter_fwhm).real
    dip = gaussian_smeared_exponential(gamma, tau, jitter_fwhm).real
    return 1.0 + rho * rho * 0.5 * (interference - dip)


def g2_distinguishable_observed(tau, gamma, rho=1.0, jitter_fwhm=0.0):
    dip = gaussian_smeared_exponential(gamma, tau, jitter_fwhm).real
    return 1.0 - rho * rho * 0.5 * dip


def zero_delay_resolved(delta, rho, jitter_fwhm):
    """Zero-delay g2 once the beat note is averaged over the detector response.

    The envelope is kept at full height; only the cos(delta*tau) factor is
    replaced by its jitter average. This is the number a fit of the
    closed-form model reports as g2(0) for resolved vs unresolved detuning.
    """
    ideal = 0.5 * (1.0 + beat_suppression(delta, jitter_fwhm))
    return float(apply_background(ideal, rho))
