"""Shared domain types and unit conversions.

Canonical units throughout the package: time in ns, rates in 1/ns, angular
frequency in rad/ns, energy in ueV, length in um, wavelength in nm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

HBAR_UEV_NS = 0.6582119569
INV_HBAR = 1.0 / HBAR_UEV_NS  # rad/ns per ueV (1.519267...)
HC = 1239.84198  # eV nm

TWO_PI = 2.0 * math.pi


def energy_to_angular(delta_e_ueV):
    """Energy (ueV) to angular frequency (rad/ns)."""
    return delta_e_ueV * INV_HBAR


def angular_to_energy(omega):
    """Angular frequency (rad/ns) to energy (ueV)."""
    return omega * HBAR_UEV_NS


def wavelength_to_energy(wavelength_nm):
    """Photon energy in meV for a vacuum wavelength in nm."""
    if wavelength_nm <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength_nm}")
    return 1e3 * HC / wavelength_nm


def energy_to_wavelength(energy_meV):
    if energy_meV <= 0:
        raise ValueError(f"energy must be positive, got {energy_meV}")
    return 1e3 * HC / energy_meV


def wavelength_shift_to_energy(wavelength_nm, shift_nm):
    """First-order energy shift |dE| = E*dlambda/lambda, in ueV."""
    return 1e3 * wavelength_to_energy(wavelength_nm) * abs(shift_nm) / wavelength_nm


def energy_separation(wavelength_a_nm, wavelength_b_nm):
    """Exact photon-energy separation |E_a - E_b| in ueV."""
    return 1e3 * abs(wavelength_to_energy(wavelength_a_nm) - wavelength_to_energy(wavelength_b_nm))


@dataclass(frozen=True)
class EmitterParams:
    """One two-level emitter.

    detuning is in rad/ns relative to the rotating frame, gamma and gamma_wg in
    1/ns, t2 (pure dephasing time) in ns and position in um.
    """

    detuning: float = 0.0
    gamma: float = 1.0
    gamma_wg: float = 1.0
    t2: float = math.inf
    position: float = 0.0

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")
        if not (0.0 <= self.gamma_wg <= self.gamma):
            raise ValueError(f"need 0 <= gamma_wg <= gamma, got gamma_wg={self.gamma_wg}, gamma={self.gamma}")
        if not self.t2 > 0:
            raise ValueError(f"t2 must be positive, got {self.t2}")
        if not math.isfinite(self.detuning):
            raise ValueError("detuning must be finite")

    @property
    def dephasing_rate(self) -> float:
        """Pure-dephasing rate 1/T2 (zero for T2 = inf)."""
        return 0.0 if math.isinf(self.t2) else 1.0 / self.t2

    @property
    def coherence_rate(self) -> float:
        """Dipole decay rate gamma/2 + 1/T2."""
        return 0.5 * self.gamma + self.dephasing_rate

    @property
    def beta_factor(self) -> float:
        return self.gamma_wg / self.gamma

    @classmethod
    def from_physical(cls, detuning_ueV=0.0, lifetime_ns=None, gamma_per_ns=None,
                      beta_factor=1.0, t2_ns=math.inf, position_um=0.0):
        if (lifetime_ns is None) == (gamma_per_ns is None):
            raise ValueError("give exactly one of lifetime_ns or gamma_per_ns")
        gamma = gamma_per_ns if gamma_per_ns is not None else 1.0 / lifetime_ns
        return cls(detuning=energy_to_angular(detuning_ueV), gamma=gamma,
                   gamma_wg=beta_factor * gamma, t2=t2_ns, position=position_um)

    @staticmethod
    def t2_for_coherence_rate(gamma, beta):
        """Dephasing time giving total dipole decay rate ``beta``."""
        excess = beta - 0.5 * gamma
        if excess < 0:
            raise ValueError("coherence rate must be at least gamma/2")
        return math.inf if excess == 0 else 1.0 / excess


@dataclass(frozen=True)
class WaveguideSystem:
    """N emitters sharing one guided mode with propagation constant k (rad/um)."""

    emitters: tuple[EmitterParams, ...]
    k: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "emitters", tuple(self.emitters))
        if not self.emitters:
            raise ValueError("need at least one emitter")

    @property
    def n(self) -> int:
        return len(self.emitters)

    @property
    def phases(self):
        """Per-emitter propagation phases k*x_i (rad), unreduced."""
        return [self.k * e.position for e in self.emitters]


@dataclass(frozen=True)
class TwoEmitterSystem:
    """Two emitters a and b on a waveguide; phase and detuning are derived."""

    emitter_a: EmitterParams
    emitter_b: EmitterParams
    k: float = 0.0

    @property
    def emitters(self) -> tuple[EmitterParams, EmitterParams]:
        return (self.emitter_a, self.emitter_b)

    @property
    def n(self) -> int:
        return 2

    @property
    def phases(self):
        return [self.k * self.emitter_a.position, self.k * self.emitter_b.position]

    @property
    def phase(self) -> float:
        return waveguide_phase(self)

    @property
    def delta(self) -> float:
        """Detuning Delta_a - Delta_b (rad/ns)."""
        return self.emitter_a.detuning - self.emitter_b.detuning

    @property
    def beta(self) -> float:
        """Mean dipole decay rate; exact when both emitters share gamma and T2."""
        return 0.5 * (self.emitter_a.coherence_rate + self.emitter_b.coherence_rate)

    @property
    def gamma(self) -> float:
        return 0.5 * (self.emitter_a.gamma + self.emitter_b.gamma)

    def swapped(self) -> "TwoEmitterSystem":
        return TwoEmitterSystem(self.emitter_b, self.emitter_a, self.k)

    @classmethod
    def symmetric(cls, gamma, gamma_wg=None, t2=math.inf, delta=0.0, k=0.0, separation=0.0):
        """Identical-rate pair with detunings +-delta/2 about the mean frequency."""
        gamma_wg = gamma if gamma_wg is None else gamma_wg
        a = EmitterParams(detuning=0.5 * delta, gamma=gamma, gamma_wg=gamma_wg, t2=t2, position=0.0)
        b = EmitterParams(detuning=-0.5 * delta, gamma=gamma, gamma_wg=gamma_wg, t2=t2, position=separation)
        return cls(a, b, k)


def waveguide_phase(system) -> float:
    """Relative propagation phase k*(x_b - x_a) reduced to [0, 2pi)."""
    a, b = system.emitters[0], system.emitters[1]
    phi = math.fmod(system.k * (b.position - a.position), TWO_PI)
    if phi < 0:
        phi += TWO_PI
    # fmod can return values within rounding of 2pi
    if phi >= TWO_PI - 1e-12 * max(1.0, abs(system.k * (b.position - a.position))):
        phi = 0.0
    return phi


def as_system(emitters: Sequence[EmitterParams] | WaveguideSystem | TwoEmitterSystem, k: float = 0.0):
    if isinstance(emitters, (WaveguideSystem, TwoEmitterSystem)):
        return emitters
    if isinstance(emitters, EmitterParams):
        return WaveguideSystem((emitters,), k)
    return WaveguideSystem(tuple(emitters), k)
