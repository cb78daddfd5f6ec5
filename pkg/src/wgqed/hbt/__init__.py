from .detection import apply_dead_time, hbt_detect
from .histogram import CorrelationHistogram, correlate, delay_edges
from .params import DetectorParams, ExcitationSchedule
from .stream import Clicks, PhotonStream
from .trajectory import (add_background, background_rate_for_rho, make_rng, simulate_stream,
                         stationary_photon_rate, trajectory_generator)

__all__ = [
    "Clicks", "CorrelationHistogram", "DetectorParams", "ExcitationSchedule", "PhotonStream",
    "add_background", "apply_dead_time", "background_rate_for_rho", "correlate", "delay_edges",
    "hbt_detect", "make_rng", "simulate_stream", "stationary_photon_rate", "trajectory_generator",
]
