"""Beamsplitter plus two single-photon detectors."""
from __future__ import annotations

import numpy as np

from ..analytic import FWHM_PER_SIGMA
from .params import DetectorParams
from .stream import Clicks, PhotonStream
from .trajectory import make_rng

DETECTED_CHANNELS = ("waveguide", "background")


def apply_dead_time(times, dead_time):
    """Drop clicks closer than ``dead_time`` to the last registered click (non-paralyzable)."""
    if dead_time <= 0 or times.size < 2:
        return times
    keep = np.zeros(times.size, dtype=bool)
    last = -np.inf
    for i, t in enumerate(times):
        if t - last >= dead_time:
            keep[i] = True
            last = t
    return times[keep]


def _detector(photons, det: DetectorParams, duration, rng, thinned):
    if not thinned:
        photons = photons[rng.random(photons.size) < det.efficiency]
    if det.jitter_fwhm > 0:
        photons = photons + rng.normal(0.0, det.jitter_fwhm / FWHM_PER_SIGMA, photons.size)
    darks = rng.random(rng.poisson(det.dark_rate * duration)) * duration
    times = np.sort(np.concatenate([photons, darks]))
    return apply_dead_time(times, det.dead_time)


def hbt_detect(stream: PhotonStream, det_a: DetectorParams, det_b: DetectorParams,
               split_ratio=0.5, seed=0, thin_first=False, channels=DETECTED_CHANNELS):
    """Route photons to two detectors and return their clicks ``(clicks_a, clicks_b)``.

    Each photon of the listed channels goes to detector A with probability
    ``split_ratio``, survives with that detector's efficiency, is delayed by
    Gaussian jitter and is merged with Poisson dark counts. ``thin_first``
    applies the losses before the split (with the equivalent routing
    probability), which must not change the statistics.
    """
    if not 0.0 < split_ratio < 1.0:
        raise ValueError("split_ratio must lie in (0, 1)")
    photons = stream.select(*channels)
    rng = make_rng(seed, 3)
    p_a = split_ratio * det_a.efficiency
    p_b = (1.0 - split_ratio) * det_b.efficiency
    if thin_first:
        photons = photons[rng.random(photons.size) < p_a + p_b]
        to_a = rng.random(photons.size) < (p_a / (p_a + p_b) if p_a + p_b > 0 else 0.0)
    else:
        to_a = rng.random(photons.size) < split_ratio
    rng_a, rng_b = make_rng(seed, 3, 0), make_rng(seed, 3, 1)
    a = _detector(photons[to_a], det_a, stream.duration, rng_a, thin_first)
    b = _detector(photons[~to_a], det_b, stream.duration, rng_b, thin_first)
    return (Clicks(a, stream.duration, det_a.dark_rate, "A"),
            Clicks(b, stream.duration, det_b.dark_rate, "B"))
