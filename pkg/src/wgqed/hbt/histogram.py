"""Start-multi-stop coincidence histograms."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .stream import Clicks, _sidecar, write_json

_CHUNK = 1 << 22


@dataclass(frozen=True)
class CorrelationHistogram:
    """Coincidences binned by delay tau = t_B - t_A (ns).

    ``counts`` are floats so that corrected histograms share the type;
    ``floor`` records any level already subtracted per bin.
    """

    edges: np.ndarray
    counts: np.ndarray
    acquisition_time: float
    rate_a: float
    rate_b: float
    dark_a: float = 0.0
    dark_b: float = 0.0
    floor: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        counts = np.asarray(self.counts, dtype=float)
        if edges.ndim != 1 or edges.size != counts.size + 1:
            raise ValueError("need len(edges) == len(counts) + 1")
        w = np.diff(edges)
        if np.any(w <= 0) or np.max(np.abs(w - w.mean())) > 1e-12 * max(1.0, np.abs(edges).max()):
            raise ValueError("bin edges must be uniform")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def bin_width(self) -> float:
        return float((self.edges[-1] - self.edges[0]) / self.counts.size)

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def accidental_level(self):
        """Expected counts per bin for uncorrelated clicks, r_A r_B w T."""
        return self.rate_a * self.rate_b * self.bin_width * self.acquisition_time

    def normalized(self):
        """Counts divided by the accidental level (g2 estimate per bin)."""
        level = self.accidental_level()
        if level <= 0:
            raise ValueError("cannot normalize a histogram without singles")
        return self.counts / level

    def with_counts(self, counts, **changes):
        return replace(self, counts=counts, **changes)

    def to_csv(self, path):
        tau = self.centers
        rows = ["tau_ns,counts"]
        rows += [f"{t!r},{c:.10g}" for t, c in zip(tau.tolist(), self.counts.tolist())]
        Path(path).write_text("\n".join(rows) + "\n")
        write_json(_sidecar(path), {
            "bin_width_ns": self.bin_width, "acquisition_time_ns": self.acquisition_time,
            "singles_rate_a_per_ns": self.rate_a, "singles_rate_b_per_ns": self.rate_b,
            "dark_rate_a_per_ns": self.dark_a, "dark_rate_b_per_ns": self.dark_b,
            "subtracted_floor": self.floor, "total_coincidences": self.total, **self.metadata})

    @classmethod
    def from_csv(cls, path):
        text = Path(path).read_text().strip().splitlines()
        if len(text) < 2 or not text[0].startswith("tau_ns"):
            raise ValueError(f"{path}: expected a 'tau_ns,counts' CSV")
        data = np.array([[float(x) for x in r.split(",")] for r in text[1:]])
        side = _sidecar(path)
        if not side.exists():
            raise ValueError(f"{path}: acquisition metadata sidecar {side.name} missing")
        meta = json.loads(side.read_text())
        w = float(meta.pop("bin_width_ns"))
        tau = data[:, 0]
        edges = np.concatenate([tau - 0.5 * w, [tau[-1] + 0.5 * w]])
        kw = dict(acquisition_time=float(meta.pop("acquisition_time_ns")),
                  rate_a=float(meta.pop("singles_rate_a_per_ns")),
                  rate_b=float(meta.pop("singles_rate_b_per_ns")),
                  dark_a=float(meta.pop("dark_rate_a_per_ns", 0.0)),
                  dark_b=float(meta.pop("dark_rate_b_per_ns", 0.0)),
                  floor=float(meta.pop("subtracted_floor", 0.0)))
        meta.pop("total_coincidences", None)
        return cls(edges, data[:, 1], metadata=meta, **kw)


def delay_edges(bin_width, max_delay):
    """Uniform edges symmetric about 0 with a bin centred on tau = 0."""
    if not bin_width > 0:
        raise ValueError("bin width must be positive")
    half = int(round(max_delay / bin_width))
    return (np.arange(-half, half + 2) - 0.5) * bin_width


def correlate(clicks_a: Clicks, clicks_b: Clicks, bin_width, max_delay) -> CorrelationHistogram:
    """Histogram every pair (a, b) with |t_b - t_a| inside the delay window.

    For each start click the window of stop clicks is located by binary
    search, then all pair delays inside it are binned, in chunks.
    """
    ta = np.asarray(clicks_a.times, dtype=float)
    tb = np.asarray(clicks_b.times, dtype=float)
    if np.any(np.diff(ta) < 0) or np.any(np.diff(tb) < 0):
        raise ValueError("click times must be sorted")
    edges = delay_edges(bin_width, max_delay)
    lo_edge, hi_edge = edges[0], edges[-1]
    nbins = edges.size - 1
    counts = np.zeros(nbins, dtype=np.int64)
    first = np.searchsorted(tb, ta + lo_edge, side="left")
    last = np.searchsorted(tb, ta + hi_edge, side="left")
    n_per = last - first
    cum = np.concatenate([[0], np.cumsum(n_per)])
    start = 0
    while start < ta.size:
        # take as many starts as fit in one chunk of pairs
        stop = int(np.searchsorted(cum, cum[start] + _CHUNK, side="right")) - 1
        stop = max(stop, start + 1)
        k = n_per[start:stop]
        owner = np.repeat(np.arange(start, stop), k)
        offs = np.arange(owner.size) - np.repeat(cum[start:stop] - cum[start], k)
        dt = tb[first[owner] + offs] - ta[owner]
        idx = np.floor((dt - lo_edge) / bin_width).astype(np.int64)
        idx = idx[(idx >= 0) & (idx < nbins)]
        counts += np.bincount(idx, minlength=nbins)
        start = stop
    duration = min(clicks_a.duration, clicks_b.duration)
    return CorrelationHistogram(edges, counts.astype(float), duration, clicks_a.rate, clicks_b.rate,
                                clicks_a.dark_rate, clicks_b.dark_rate)
