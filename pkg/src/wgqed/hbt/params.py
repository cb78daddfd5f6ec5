from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ExcitationSchedule:
    """How the emitters are excited.

    pulsed: every ``period`` ns each emitter is independently reset to |e>
    with probability ``probability``, after an exponentially distributed
    capture delay with mean ``capture_delay`` ns. cw: incoherent repumping at
    ``repump`` per ns.
    """

    mode: str = "pulsed"
    period: float = 25.0
    probability: float = 1.0
    capture_delay: float = 0.05
    repump: float = 0.0

    def __post_init__(self):
        if self.mode not in ("pulsed", "cw"):
            raise ValueError(f"mode must be 'pulsed' or 'cw', got {self.mode!r}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("excitation probability must lie in [0, 1]")
        if not self.period > 0:
            raise ValueError("period must be positive")
        if self.capture_delay < 0 or self.repump < 0:
            raise ValueError("capture_delay and repump must be nonnegative")

    @classmethod
    def pulsed(cls, period=25.0, probability=1.0, capture_delay=0.05):
        return cls("pulsed", period, probability, capture_delay)

    @classmethod
    def cw(cls, repump):
        return cls("cw", repump=repump)


@dataclass(frozen=True)
class DetectorParams:
    """Single-photon detector: efficiency, Gaussian jitter (FWHM, ns), darks (1/ns)."""

    efficiency: float = 1.0
    jitter_fwhm: float = 0.0
    dark_rate: float = 0.0
    dead_time: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must lie in [0, 1]")
        if self.jitter_fwhm < 0 or self.dark_rate < 0 or self.dead_time < 0:
            raise ValueError("jitter, dark rate and dead time must be nonnegative")
        if not math.isfinite(self.dark_rate):
            raise ValueError("dark rate must be finite")

    @classmethod
    def ingaas(cls):
        """InGaAs SPD of the reference setup: 20 %, 200 ps FWHM, 200 Hz darks."""
        return cls(efficiency=0.20, jitter_fwhm=0.200, dark_rate=200e-9)
