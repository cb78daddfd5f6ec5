"""Damped Gauss-Newton (Levenberg-Marquardt) least squares.

Minimizes sum(r(p)^2) for weighted residuals r. Jacobians are forward
differences with relative steps; simple box bounds are enforced by
clipping trial points.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FTOL = 1e-9
MAX_ITER = 200


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    jac: np.ndarray
    iterations: int
    converged: bool
    grad_norm: float
    history: list = field(default_factory=list)
    message: str = ""


def numeric_jacobian(fun, x, r0, lower, upper, rel_step=1e-7):
    jac = np.empty((r0.size, x.size))
    for j in range(x.size):
        h = rel_step * max(abs(x[j]), 1e-3)
        xp = x.copy()
        xp[j] += h
        if xp[j] > upper[j]:
            xp[j] = x[j] - h
        jac[:, j] = (fun(xp) - r0) / (xp[j] - x[j])
    return jac


def levenberg_marquardt(fun, x0, lower=None, upper=None, ftol=FTOL, max_iter=MAX_ITER,
                        gtol=1e-8, lam0=1e-3):
    """Minimize ||fun(x)||^2; only strictly decreasing steps are accepted."""
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, float)
    x = np.clip(x, lower, upper)
    r = fun(x)
    cost = float(r @ r)
    history = [cost]
    lam = lam0
    converged = False
    message = "maximum iterations reached"
    it = 0
    jac = numeric_jacobian(fun, x, r, lower, upper)
    for it in range(1, max_iter + 1):
        g = jac.T @ r
        a = jac.T @ jac
        # gradient projected on the feasible directions at active bounds
        free = ~(((x <= lower) & (g > 0)) | ((x >= upper) & (g < 0)))
        if np.linalg.norm(g[free]) <= gtol * max(1.0, cost):
            converged, message = True, "gradient below tolerance"
            break
        scale = np.maximum(np.diag(a), 1e-30)
        # parameters pinned at a bound stay out of the step (active set)
        af = a[np.ix_(free, free)]
        accepted = False
        while lam < 1e16:
            step = np.zeros(n)
            try:
                step[free] = np.linalg.solve(af + lam * np.diag(scale[free]), -g[free])
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = np.clip(x + step, lower, upper)
            r_new = fun(x_new)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            converged, message = True, "no further decrease possible"
            break
        rel = (cost - cost_new) / max(cost, 1e-300)
        x, r, cost = x_new, r_new, cost_new
        history.append(cost)
        lam = max(lam / 10.0, 1e-12)
        jac = numeric_jacobian(fun, x, r, lower, upper)
        if rel < ftol:
            # a heavily damped step can stall far from the optimum: only stop
            # once the Gauss-Newton decrement is small as well
            g = jac.T @ r
            free = ~(((x <= lower) & (g > 0)) | ((x >= upper) & (g < 0)))
            gn = scaled_gradient_norm(jac[:, free], r) if free.any() else 0.0
            if gn <= grad_tolerance(cost):
                converged, message = True, "relative decrease below tolerance"
                break
            lam = lam0
    g = jac.T @ r
    free = ~(((x <= lower) & (g > 0)) | ((x >= upper) & (g < 0)))
    gnorm = scaled_gradient_norm(jac[:, free], r) if free.any() else 0.0
    if converged and gnorm > grad_tolerance(cost):
        converged, message = False, f"stopped with gradient norm {gnorm:.3g}"
    return LMResult(x, cost, jac, it, converged, gnorm, history, message)


def scaled_gradient_norm(jac, r):
    """sqrt(g' (J'J)^+ g): the gradient in the Gauss-Newton metric, unit-free."""
    g = jac.T @ r
    return float(np.sqrt(max(g @ np.linalg.pinv(jac.T @ jac) @ g, 0.0)))


def grad_tolerance(cost):
    return 1e-3 * np.sqrt(max(cost, 1.0))


def covariance(jac, cost, dof):
    """Parameter covariance from the Jacobian, scaled by the reduced chi-square."""
    a = jac.T @ jac
    try:
        cov = np.linalg.pinv(a)
    except np.linalg.LinAlgError:
        return np.full(a.shape, np.inf)
    return cov * (cost / dof if dof > 0 else 1.0)
