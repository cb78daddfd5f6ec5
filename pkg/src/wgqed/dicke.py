"""Exact small-N open-system dynamics for emitters on a shared waveguide mode.

Basis: tensor product |q_1 q_2 ... q_N> with q in {g, e} (index 0 = g,
1 = e), emitter 1 leftmost. Density matrices are vectorized row-major, so
vec(A rho B) = kron(A, B.T) vec(rho).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .analytic import G2Curve
from .units import as_system

MAX_EMITTERS = 6
DEFAULT_DT_FRACTION = 0.005
MAX_DT_FRACTION = 0.01

SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.conj().T
NUMBER = SIGMA_PLUS @ SIGMA_MINUS

CHANNELS = ("waveguide", "nonguided", "dephasing", "independent")
DEFAULT_CHANNELS = ("waveguide", "nonguided", "dephasing")


class StepSizeError(ValueError):
    pass


def embed(op, site, n):
    """Single-site operator ``op`` acting on emitter ``site`` of ``n``."""
    if not 0 <= site < n:
        raise IndexError(site)
    out = np.eye(1, dtype=complex)
    for j in range(n):
        out = np.kron(out, op if j == site else np.eye(2, dtype=complex))
    return out


def lowering(site, n):
    return embed(SIGMA_MINUS, site, n)


def basis_state(label):
    """Ket for a string such as 'eg' (emitter 1 first)."""
    vec = np.ones(1, dtype=complex)
    for ch in label:
        if ch not in "ge":
            raise ValueError(f"bad basis label {label!r}")
        vec = np.kron(vec, np.array([1, 0] if ch == "g" else [0, 1], dtype=complex))
    return vec


def excitation_number(n):
    """Total excitation operator sum_i sigma+_i sigma-_i (diagonal)."""
    return sum(embed(NUMBER, i, n) for i in range(n))


def collective_jump(system):
    """sqrt(gamma_wg) * sum_i exp(i k x_i) sigma-_i.

    A common gamma_wg is assumed for the prefactor; unequal couplings are
    carried per emitter as sqrt(gamma_wg_i).
    """
    system = as_system(system)
    n = system.n
    if n > MAX_EMITTERS:
        raise ValueError(f"at most {MAX_EMITTERS} emitters supported")
    phases = system.phases
    ref = phases[0]
    op = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for i, e in enumerate(system.emitters):
        op += math.sqrt(e.gamma_wg) * np.exp(1j * (phases[i] - ref)) * lowering(i, n)
    return op


@dataclass(frozen=True)
class DickePair:
    bright: np.ndarray
    dark: np.ndarray


def bright_dark(phi):
    """|B>, |D> = (|eg> +- exp(i phi)|ge>)/sqrt(2).

    With the jump operator sqrt(g)(sigma_a + exp(i kL) sigma_b), the state
    that radiates at 2*gamma_wg is ``bright_dark(-kL).bright``; see
    :func:`dicke_states`.
    """
    eg, ge = basis_state("eg"), basis_state("ge")
    ph = np.exp(1j * phi)
    return DickePair((eg + ph * ge) / math.sqrt(2.0), (eg - ph * ge) / math.sqrt(2.0))


def dicke_states(system):
    """Bright/dark pair matched to the system's collective jump operator."""
    return bright_dark(-system.phase)


def decay_spectrum(n, phases, gamma_wg):
    """Collective decay rates of the single-excitation sector, descending.

    Eigenvalues of M_ij = gamma_wg * exp(i(phi_i - phi_j)).
    """
    if n > MAX_EMITTERS:
        raise ValueError(f"at most {MAX_EMITTERS} emitters supported")
    phases = np.broadcast_to(np.asarray(phases, dtype=float), (n,))
    ph = np.exp(1j * phases)
    m = gamma_wg * np.outer(ph, ph.conj())
    return np.sort(np.linalg.eigvalsh(m))[::-1]


@dataclass(frozen=True)
class LindbladGenerator:
    """Hamiltonian plus labelled jump operators; immutable once built."""

    hamiltonian: np.ndarray
    jumps: tuple = field(default_factory=tuple)  # (channel, site or None, operator)
    n: int = 1

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @cached_property
    def _decay(self):
        d = np.zeros_like(self.hamiltonian)
        for _, _, op in self.jumps:
            d = d + op.conj().T @ op
        return d

    @property
    def effective_hamiltonian(self):
        """H - (i/2) sum L^dag L, the no-jump generator of quantum trajectories."""
        return self.hamiltonian - 0.5j * self._decay

    def apply(self, rho):
        h = self.hamiltonian
        out = -1j * (h @ rho - rho @ h)
        for _, _, op in self.jumps:
            out += op @ rho @ op.conj().T
        out -= 0.5 * (self._decay @ rho + rho @ self._decay)
        return out

    @cached_property
    def superoperator(self):
        d = self.dim
        eye = np.eye(d, dtype=complex)
        h = self.hamiltonian
        sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        for _, _, op in self.jumps:
            sup += np.kron(op, op.conj())
        sup -= 0.5 * (np.kron(self._decay, eye) + np.kron(eye, self._decay.T))
        return sup

    @cached_property
    def max_rate(self) -> float:
        """Upper bound on the spectral radius of the generator (1/ns)."""
        ev = np.linalg.eigvalsh(self.hamiltonian)
        bound = (ev[-1] - ev[0]) if ev.size else 0.0
        for _, _, op in self.jumps:
            bound += 2.0 * np.linalg.norm(op, 2) ** 2
        return float(bound)

    def default_dt(self):
        r = self.max_rate
        return math.inf if r == 0 else DEFAULT_DT_FRACTION / r


def lindblad_generator(system, channels=DEFAULT_CHANNELS, repump=0.0):
    """Build the Lindblad generator for ``system``.

    channels:
      waveguide    collective decay through the guided mode
      nonguided    per-emitter decay at gamma - gamma_wg
      independent  per-emitter decay at the full gamma (no mode-mediated coherence)
      dephasing    per-emitter sqrt(2/T2) sigma+sigma-, so dipoles lose coherence at 1/T2

    ``repump`` (1/ns) adds per-emitter incoherent pumping sqrt(r) sigma+.
    """
    system = as_system(system)
    n = system.n
    if n > MAX_EMITTERS:
        raise ValueError(f"at most {MAX_EMITTERS} emitters supported")
    unknown = set(channels) - set(CHANNELS)
    if unknown:
        raise ValueError(f"unknown channels {sorted(unknown)}")
    if repump < 0:
        raise ValueError("repump rate must be nonnegative")
    if "independent" in channels and ("waveguide" in channels or "nonguided" in channels):
        raise ValueError("'independent' replaces 'waveguide' + 'nonguided'")
    for e in system.emitters:
        if e.gamma_wg > e.gamma:
            raise ValueError("gamma_wg exceeds gamma")

    dim = 2 ** n
    h = np.zeros((dim, dim), dtype=complex)
    for i, e in enumerate(system.emitters):
        h += e.detuning * embed(NUMBER, i, n)

    jumps = []
    if "waveguide" in channels and any(e.gamma_wg > 0 for e in system.emitters):
        jumps.append(("waveguide", None, collective_jump(system)))
    for i, e in enumerate(system.emitters):
        low = lowering(i, n)
        if "nonguided" in channels and e.gamma > e.gamma_wg:
            jumps.append(("nonguided", i, math.sqrt(e.gamma - e.gamma_wg) * low))
        if "independent" in channels:
            jumps.append(("independent", i, math.sqrt(e.gamma) * low))
        if "dephasing" in channels and e.dephasing_rate > 0:
            jumps.append(("dephasing", i, math.sqrt(2.0 * e.dephasing_rate) * embed(NUMBER, i, n)))
        if repump > 0:
            jumps.append(("repump", i, math.sqrt(repump) * low.conj().T))
    return LindbladGenerator(h, tuple(jumps), n)


def rk4_step_matrix(generator, dt):
    """One RK4 step of the linear map as a matrix on vec(rho)."""
    hl = dt * generator.superoperator
    eye = np.eye(hl.shape[0], dtype=complex)
    term = eye.copy()
    out = eye.copy()
    for k in range(1, 5):
        term = term @ hl / k
        out = out + term
    return out


def _check_dt(generator, dt):
    if dt is None:
        return generator.default_dt()
    if dt <= 0:
        raise StepSizeError("dt must be positive")
    limit = MAX_DT_FRACTION / generator.max_rate if generator.max_rate > 0 else math.inf
    if dt > limit * (1 + 1e-12):
        raise StepSizeError(f"dt = {dt} exceeds 0.01/max_rate = {limit}")
    return dt


def _rk4_matrix_form(rho, generator, dt, steps):
    for _ in range(steps):
        k1 = generator.apply(rho)
        k2 = generator.apply(rho + 0.5 * dt * k1)
        k3 = generator.apply(rho + 0.5 * dt * k2)
        k4 = generator.apply(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


_SUPEROP_MAX_DIM = 32


def propagate(x0, generator, times, dt=None):
    """Fixed-step RK4 propagation of a (not necessarily physical) matrix.

    Returns an array of shape (len(times), d, d). ``times`` must be
    nondecreasing and start at or after 0; each interval is split into an
    integer number of equal steps no longer than ``dt``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("times must be nonnegative and nondecreasing")
    dt = _check_dt(generator, dt)
    d = generator.dim
    x = np.asarray(x0, dtype=complex).copy()
    out = np.empty((times.size, d, d), dtype=complex)
    t_prev = 0.0
    cache = {}
    use_superop = d <= _SUPEROP_MAX_DIM
    vec = x.reshape(-1)
    for j, t in enumerate(times):
        span = t - t_prev
        if span > 0:
            steps = 1 if math.isinf(dt) else max(1, math.ceil(span / dt - 1e-9))
            h = span / steps
            if use_superop:
                key = (round(h, 15), steps)
                if key not in cache:
                    cache[key] = np.linalg.matrix_power(rk4_step_matrix(generator, h), steps)
                vec = cache[key] @ vec
            else:
                vec = _rk4_matrix_form(vec.reshape(d, d), generator, h, steps).reshape(-1)
        out[j] = vec.reshape(d, d)
        t_prev = t
    return out


def evolve(rho0, generator, t, dt=None):
    """rho(t) by fixed-step RK4 (default dt = 0.005 / max_rate)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return propagate(rho0, generator, [t], dt)[0]


def evolve_grid(rho0, generator, times, dt=None):
    return propagate(rho0, generator, times, dt)


def density_checks(rho):
    """(trace deviation, hermiticity error, minimum eigenvalue)."""
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    return float(abs(np.trace(rho) - 1.0)), herm, float(ev[0])


def projector(ket):
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def steady_state(generator):
    """Stationary density matrix from the null space of the superoperator."""
    d = generator.dim
    if d > _SUPEROP_MAX_DIM:
        raise ValueError("steady_state is limited to N <= 5 emitters")
    _, s, vh = np.linalg.svd(generator.superoperator)
    rho = vh[-1].conj().reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return rho


def two_time_g2_oracle(system, tau, preparation="steady", repump=None,
                       coupling="independent", dt=None):
    """Normalized g2(tau) of the waveguide output via the quantum regression theorem.

    preparation: "steady" uses the stationary state under weak incoherent
    repumping (default rate 1e-4 * min gamma); otherwise a density matrix or
    basis label (e.g. "ee") for the state at tau = 0, normalized by
    <a^dag a>(0) <a^dag a>(tau).

    coupling: "independent" has each emitter decay on its own at gamma (the
    premise of the closed-form model); "collective" routes gamma_wg through
    the shared mode, which adds mode-mediated coherence between emitters.
    """
    system = as_system(system)
    tau = np.asarray(tau, dtype=float)
    t_abs = np.abs(tau)
    order = np.argsort(t_abs)
    if coupling == "independent":
        channels = ("independent", "dephasing")
    elif coupling == "collective":
        channels = ("waveguide", "nonguided", "dephasing")
    else:
        raise ValueError(f"unknown coupling {coupling!r}")
    a = collective_jump(system)
    ada = a.conj().T @ a

    if isinstance(preparation, str) and preparation == "steady":
        if repump is None:
            repump = 1e-4 * min(e.gamma for e in system.emitters)
        gen = lindblad_generator(system, channels, repump=repump)
        rho0 = steady_state(gen)
        n0 = np.trace(ada @ rho0).real
        x = propagate(a @ rho0 @ a.conj().T, gen, t_abs[order], dt)
        num = np.einsum("ij,tji->t", ada, x).real
        vals = num / (n0 * n0)
    else:
        rho0 = projector(basis_state(preparation)) if isinstance(preparation, str) else np.asarray(preparation, complex)
        gen = lindblad_generator(system, channels, repump=repump or 0.0)
        n0 = np.trace(ada @ rho0).real
        x = propagate(a @ rho0 @ a.conj().T, gen, t_abs[order], dt)
        rho_t = propagate(rho0, gen, t_abs[order], dt)
        num = np.einsum("ij,tji->t", ada, x).real
        nt = np.einsum("ij,tji->t", ada, rho_t).real
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(nt > 0, num / (n0 * nt), 0.0)
    out = np.empty_like(vals)
    out[order] = vals
    return G2Curve(tau, np.clip(out, 0.0, None), "lindblad-oracle")


def excited_population(rho):
    """Probability of at least one excitation, 1 - <g...g|rho|g...g>."""
    return 1.0 - rho[0, 0].real
