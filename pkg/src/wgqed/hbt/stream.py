"""Photon and click containers with their on-disk formats."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

WAVEGUIDE, NONGUIDED, BACKGROUND = 0, 1, 2
CHANNEL_NAMES = {WAVEGUIDE: "waveguide", NONGUIDED: "nonguided", BACKGROUND: "background"}
CHANNEL_CODES = {v: k for k, v in CHANNEL_NAMES.items()}

RECORD_DTYPE = np.dtype([("t", "<f8"), ("channel", "u1")])


def _sidecar(path):
    return Path(path).with_suffix(".json")


def _clean(obj):
    """Make metadata JSON-safe (numpy scalars, inf)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_json(path, payload):
    Path(path).write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class PhotonStream:
    """Time-ordered emission events over [0, duration] ns."""

    times: np.ndarray
    channels: np.ndarray
    duration: float
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        channels = np.asarray(self.channels, dtype=np.uint8)
        if times.shape != channels.shape or times.ndim != 1:
            raise ValueError("times and channels must be 1-d and equally long")
        if times.size:
            if np.any(np.diff(times) < 0):
                raise ValueError("timestamps must be nondecreasing")
            if times[0] < 0 or times[-1] > self.duration:
                raise ValueError("timestamps must lie within [0, duration]")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "channels", channels)

    def __len__(self):
        return self.times.size

    def select(self, *names):
        codes = [CHANNEL_CODES[n] for n in names]
        return self.times[np.isin(self.channels, codes)]

    def count(self, name):
        return int(np.count_nonzero(self.channels == CHANNEL_CODES[name]))

    def _meta(self):
        return {"duration_ns": self.duration, "seed": self.seed, "n_events": len(self),
                **self.metadata}

    def to_csv(self, path):
        lines = ["t_ns,channel"]
        lines += [f"{t!r},{CHANNEL_NAMES[int(c)]}" for t, c in zip(self.times.tolist(), self.channels.tolist())]
        Path(path).write_text("\n".join(lines) + "\n")
        write_json(_sidecar(path), self._meta())

    def to_binary(self, path):
        rec = np.empty(self.times.size, dtype=RECORD_DTYPE)
        rec["t"] = self.times
        rec["channel"] = self.channels
        Path(path).write_bytes(rec.tobytes())
        write_json(_sidecar(path), {**self._meta(), "format": "f8le+u1"})

    @classmethod
    def _from_meta(cls, times, channels, meta):
        meta = dict(meta)
        duration = float(meta.pop("duration_ns"))
        seed = meta.pop("seed", None)
        meta.pop("n_events", None)
        meta.pop("format", None)
        return cls(times, channels, duration, seed, meta)

    @classmethod
    def from_csv(cls, path):
        meta = json.loads(_sidecar(path).read_text())
        rows = Path(path).read_text().splitlines()[1:]
        times = np.array([float(r.split(",")[0]) for r in rows if r], dtype=float)
        channels = np.array([CHANNEL_CODES[r.split(",")[1]] for r in rows if r], dtype=np.uint8)
        return cls._from_meta(times, channels, meta)

    @classmethod
    def from_binary(cls, path):
        meta = json.loads(_sidecar(path).read_text())
        rec = np.frombuffer(Path(path).read_bytes(), dtype=RECORD_DTYPE)
        return cls._from_meta(rec["t"].copy(), rec["channel"].copy(), meta)

    def merged(self, times, channel, extra_meta=None):
        """New stream with extra events of one channel, clipped to [0, duration]."""
        times = np.asarray(times, dtype=float)
        times = times[(times >= 0) & (times <= self.duration)]
        all_t = np.concatenate([self.times, times])
        all_c = np.concatenate([self.channels, np.full(times.size, channel, np.uint8)])
        order = np.argsort(all_t, kind="stable")
        meta = {**self.metadata, **(extra_meta or {})}
        return PhotonStream(all_t[order], all_c[order], self.duration, self.seed, meta)


@dataclass(frozen=True)
class Clicks:
    """Detector click times plus what is needed to normalize correlations."""

    times: np.ndarray
    duration: float
    dark_rate: float = 0.0
    label: str = ""

    @property
    def rate(self) -> float:
        return self.times.size / self.duration

    def __len__(self):
        return self.times.size
