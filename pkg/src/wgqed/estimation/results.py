from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..hbt.stream import write_json


@dataclass
class FitResult:
    """Fitted parameters with 1-sigma uncertainties and solver diagnostics.

    ``derived`` holds secondary quantities (name -> (value, sigma)) computed
    from the fitted parameters, e.g. g2_0 or a peak separation.
    """

    model: str
    names: list
    values: np.ndarray
    sigmas: np.ndarray
    rss: float
    iterations: int
    converged: bool
    grad_norm: float = 0.0
    n_points: int = 0
    derived: dict = field(default_factory=dict)
    fixed: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    history: list = field(default_factory=list)
    message: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        sig = np.asarray(self.sigmas, dtype=float)
        # a missing uncertainty is reported as infinite, never negative
        self.sigmas = np.where(np.isfinite(sig), np.abs(sig), np.inf)

    def _lookup(self, name):
        if name in self.names:
            i = self.names.index(name)
            return float(self.values[i]), float(self.sigmas[i])
        if name in self.derived:
            v, s = self.derived[name]
            return float(v), float(s)
        if name in self.fixed:
            return float(self.fixed[name]), 0.0
        raise KeyError(name)

    def __getitem__(self, name):
        return self._lookup(name)[0]

    def sigma(self, name):
        return self._lookup(name)[1]

    @property
    def reduced_chi2(self):
        dof = self.n_points - len(self.names)
        return self.rss / dof if dof > 0 else math.nan

    def to_dict(self):
        return {
            "model": self.model, "names": list(self.names),
            "values": [float(v) for v in self.values], "sigmas": [float(s) for s in self.sigmas],
            "rss": float(self.rss), "iterations": int(self.iterations),
            "converged": bool(self.converged), "grad_norm": float(self.grad_norm),
            "n_points": int(self.n_points),
            "derived": {k: [float(v), float(s)] for k, (v, s) in self.derived.items()},
            "fixed": {k: float(v) for k, v in self.fixed.items()},
            "warnings": list(self.warnings), "message": self.message,
        }

    def to_json(self, path):
        write_json(path, self.to_dict())

    @classmethod
    def from_dict(cls, d):
        num = float  # also parses the "inf" strings written for infinite sigmas
        return cls(d["model"], list(d["names"]), [num(v) for v in d["values"]],
                   [num(s) for s in d["sigmas"]], float(d["rss"]), int(d["iterations"]),
                   bool(d["converged"]), float(d.get("grad_norm", 0.0)), int(d.get("n_points", 0)),
                   {k: (num(v), num(s)) for k, (v, s) in d.get("derived", {}).items()},
                   dict(d.get("fixed", {})), list(d.get("warnings", [])),
                   message=d.get("message", ""))

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_model(model, names, x0, predict, y, sigma, lower=None, upper=None, fixed=None,
              ftol=None, max_iter=None):
    """Weighted least squares of ``predict(dict of params) -> array`` against ``y``."""
    from .lm import FTOL, MAX_ITER, covariance, levenberg_marquardt

    fixed = dict(fixed or {})
    y = np.asarray(y, dtype=float)
    w = 1.0 / np.asarray(sigma, dtype=float)

    def resid(x):
        return (predict({**fixed, **dict(zip(names, x))}) - y) * w

    lm = levenberg_marquardt(resid, x0, lower, upper, ftol or FTOL, max_iter or MAX_ITER)
    dof = y.size - len(names)
    cov = covariance(lm.jac, lm.cost, dof)
    res = FitResult(model, list(names), lm.x, np.sqrt(np.clip(np.diag(cov), 0.0, None)), lm.cost,
                    lm.iterations, lm.converged, lm.grad_norm, int(y.size), fixed=fixed,
                    history=lm.history, message=lm.message)
    res.covariance = cov
    return res


def propagate(result: FitResult, func, rel_step=1e-6):
    """Value and 1-sigma of ``func(params dict)`` by linearized error propagation."""
    p = {**result.fixed, **dict(zip(result.names, result.values))}
    v0 = float(func(p))
    cov = getattr(result, "covariance", None)
    if cov is None:
        return v0, math.nan
    grad = np.zeros(len(result.names))
    for i, n in enumerate(result.names):
        h = rel_step * max(abs(p[n]), 1e-3)
        q = dict(p)
        q[n] = p[n] + h
        try:
            grad[i] = (float(func(q)) - v0) / h
        except ValueError:
            # stepped outside the parameter domain; difference backwards
            q[n] = p[n] - h
            grad[i] = (v0 - float(func(q))) / h
    return v0, float(np.sqrt(max(grad @ cov @ grad, 0.0)))
