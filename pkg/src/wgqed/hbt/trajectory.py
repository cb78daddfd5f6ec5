"""Quantum-jump photon-stream generator.

Many independent trajectories are advanced in lock step, one event per
trajectory per iteration. Between events the state follows the no-jump
evolution exp(-i H_eff t), evaluated exactly through an eigendecomposition
of H_eff; the waiting time to the next jump is the root of
||psi(t)||^2 = u for uniform u, found by bracketed Newton iteration.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from ..dicke import (NUMBER, LindbladGenerator, collective_jump, embed, lindblad_generator,
                     lowering, steady_state)
from ..units import as_system
from .params import ExcitationSchedule
from .stream import BACKGROUND, NONGUIDED, WAVEGUIDE, PhotonStream

_RECORDED = {"waveguide": WAVEGUIDE, "nonguided": NONGUIDED}
_COND_LIMIT = 1e8
CW_SEGMENT_NS = 2000.0
MAX_TRAJECTORIES = 8192


def make_rng(seed, *path):
    """Counter-based generator for a named substream of ``seed``."""
    seq = np.random.SeedSequence(seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(seq))


def trajectory_generator(system, schedule: ExcitationSchedule, coupling="collective"):
    """Master equation whose unraveling the stream samples.

    "collective": one guided jump a = sqrt(gamma_wg) sum exp(ikx) sigma-.
    "independent": same per-emitter decay as uncoupled emitters, unraveled
    with the detected combination a/sqrt(2) and its orthogonal partner, so
    that the detected field still interferes.
    """
    system = as_system(system)
    repump = schedule.repump if schedule.mode == "cw" else 0.0
    if coupling == "collective":
        return lindblad_generator(system, ("waveguide", "nonguided", "dephasing"), repump=repump)
    if coupling != "independent":
        raise ValueError(f"unknown coupling {coupling!r}")
    base = lindblad_generator(system, ("dephasing",), repump=repump)
    n = system.n
    a = collective_jump(system)
    if n == 1:
        jumps = [("waveguide", None, a)]
    else:
        if n != 2:
            raise ValueError("independent coupling is implemented for one or two emitters")
        ph = np.exp(1j * (system.phases[1] - system.phases[0]))
        wa, wb = (math.sqrt(e.gamma_wg) for e in system.emitters)
        plus = (wa * lowering(0, 2) + ph * wb * lowering(1, 2)) / math.sqrt(2.0)
        minus = (wa * lowering(0, 2) - ph * wb * lowering(1, 2)) / math.sqrt(2.0)
        jumps = [("waveguide", None, plus), ("nonguided", None, minus)]
    for i, e in enumerate(system.emitters):
        if e.gamma > e.gamma_wg:
            jumps.append(("nonguided", i, math.sqrt(e.gamma - e.gamma_wg) * lowering(i, n)))
    return LindbladGenerator(base.hamiltonian, tuple(jumps) + base.jumps, n)


def stationary_photon_rate(system, schedule, coupling="collective"):
    """Stationary rate of recorded waveguide photons (1/ns) under cw repumping."""
    gen = trajectory_generator(system, schedule, coupling)
    rho = steady_state(gen)
    return float(sum(np.trace(op.conj().T @ op @ rho).real
                     for name, _, op in gen.jumps if name == "waveguide"))


class _NoJumpPropagator:
    def __init__(self, h_eff, decay_op):
        self.h_eff = h_eff
        self.decay_op = decay_op
        lam, v = np.linalg.eig(h_eff)
        self.exact = np.linalg.cond(v) < _COND_LIMIT
        if self.exact:
            self.lam = lam
            self.v_t = v.T.copy()
            self.vinv_t = np.linalg.inv(v).T.copy()
            # norm and decay rate as quadratic forms in eigen-coordinates
            self.gram = v.conj().T @ v
            self.decay_gram = v.conj().T @ decay_op @ v

    def coeffs(self, psi):
        return psi @ self.vinv_t if self.exact else psi

    def at(self, c, tau):
        if self.exact:
            return (c * np.exp(-1j * np.outer(tau, self.lam))) @ self.v_t
        # near an exceptional point: batched matrix exponentials
        u = scipy.linalg.expm(-1j * tau[:, None, None] * self.h_eff[None])
        return np.einsum("mij,mj->mi", u, c)

    def norm_and_rate(self, c, tau):
        """||psi(tau)||^2 and -d/dtau of it."""
        if self.exact:
            z = c * np.exp(-1j * np.outer(tau, self.lam))
            zc = z.conj()
            return (np.einsum("mi,mi->m", zc, z @ self.gram.T).real,
                    np.einsum("mi,mi->m", zc, z @ self.decay_gram.T).real)
        psi = self.at(c, tau)
        return _norm2(psi), np.einsum("mi,mi->m", psi.conj(), psi @ self.decay_op.T).real


def _norm2(psi):
    return np.einsum("mi,mi->m", psi.conj(), psi).real


def _solve_waiting_time(prop, c, log_u, hi):
    """Root of log||psi(tau)||^2 = log_u on (0, hi), vectorized.

    Newton steps on the log norm, falling back to bisection whenever a step
    leaves the current bracket.
    """
    lo = np.zeros_like(hi)
    hi = hi.copy()
    _, rate0 = prop.norm_and_rate(c, lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = -log_u / rate0
    tau = np.where((tau > 0) & (tau < hi), tau, 0.5 * hi)
    active = np.arange(tau.size)
    for _ in range(200):
        s, r = prop.norm_and_rate(c[active], tau[active])
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.log(s) - log_u[active]
            new = tau[active] + f * s / r
        t_a = tau[active]
        lo[active] = np.where(f > 0, t_a, lo[active])
        hi[active] = np.where(f <= 0, t_a, hi[active])
        bad = ~np.isfinite(new) | (new <= lo[active]) | (new >= hi[active])
        new = np.where(bad, 0.5 * (lo[active] + hi[active]), new)
        hit = np.abs(f) < 1e-13
        new = np.where(hit, t_a, new)
        done = hit | (np.abs(new - t_a) <= 1e-11 * (1.0 + t_a))
        tau[active] = new
        active = active[~done]
        if active.size == 0:
            break
    return tau


def _run(gen, psi, t_end, ev_time, ev_site, rng):
    """Advance trajectories to ``t_end``; returns (trajectory, time, channel) arrays."""
    m, d = psi.shape
    n = gen.n
    decay_op = 2j * (gen.effective_hamiltonian - gen.hamiltonian)
    prop = _NoJumpPropagator(gen.effective_hamiltonian, decay_op)
    jump_ops = [op for _, _, op in gen.jumps]
    codes = np.array([_RECORDED.get(name, 255) for name, _, _ in gen.jumps], dtype=np.int16)
    raise_ops = [embed(np.array([[0, 0], [1, 0]], complex), i, n) for i in range(n)]
    keep_ops = [embed(NUMBER, i, n) for i in range(n)]

    t = np.zeros(m)
    ptr = np.zeros(m, dtype=np.int64)
    alive = t < t_end
    rec_traj, rec_t, rec_c = [], [], []
    while np.any(alive):
        idx = np.flatnonzero(alive)
        next_ev = ev_time[idx, ptr[idx]]
        stop = np.minimum(next_ev, t_end[idx])
        h = stop - t[idx]
        c = prop.coeffs(psi[idx])
        log_u = np.log1p(-rng.random(idx.size))
        psi_h = prop.at(c, h)
        s_h = _norm2(psi_h)
        with np.errstate(divide="ignore"):
            jumped = np.log(s_h) < log_u

        if np.any(jumped):
            j = np.flatnonzero(jumped)
            tau = _solve_waiting_time(prop, c[j], log_u[j], h[j])
            pj = prop.at(c[j], tau)
            pj /= np.sqrt(_norm2(pj))[:, None]
            cand = np.stack([pj @ op.T for op in jump_ops], axis=1)  # (k, channels, d)
            w = np.einsum("kci,kci->kc", cand.conj(), cand).real
            cum = np.cumsum(w, axis=1)
            pick = (cum < (rng.random(j.size) * cum[:, -1])[:, None]).sum(axis=1)
            pick = np.minimum(pick, len(jump_ops) - 1)
            new = cand[np.arange(j.size), pick]
            new /= np.sqrt(_norm2(new))[:, None]
            gj = idx[j]
            psi[gj] = new
            t[gj] += tau
            rec = codes[pick] != 255
            rec_traj.append(gj[rec])
            rec_t.append(t[gj][rec])
            rec_c.append(codes[pick][rec])

        if np.any(~jumped):
            q = np.flatnonzero(~jumped)
            gq = idx[q]
            psi[gq] = psi_h[q] / np.sqrt(s_h[q])[:, None]
            t[gq] = stop[q]
            hit = next_ev[q] < t_end[gq]
            if np.any(hit):
                gh = gq[hit]
                sites = ev_site[gh, ptr[gh]]
                v = rng.random(gh.size)
                for site in np.unique(sites):
                    sel = sites == site
                    rows = gh[sel]
                    up = psi[rows] @ raise_ops[site].T
                    stay = psi[rows] @ keep_ops[site].T
                    p_up = _norm2(up)
                    out = np.where((v[sel] < p_up)[:, None], up, stay)
                    psi[rows] = out / np.sqrt(_norm2(out))[:, None]
                ptr[gh] += 1
        alive = t < t_end

    if rec_t:
        return np.concatenate(rec_traj), np.concatenate(rec_t), np.concatenate(rec_c).astype(np.uint8)
    return np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.uint8)


def _pulse_events(n_traj, first, count, n_emit, schedule, rng):
    """Per-trajectory sorted excitation times and sites, padded with +inf."""
    q = int(count.max()) if count.size else 0
    k = np.arange(q)[None, :, None]
    pulse_t = (k * schedule.period) * np.ones((n_traj, 1, n_emit))
    excited = rng.random((n_traj, q, n_emit)) < schedule.probability
    excited &= (k < count[:, None, None])
    if schedule.capture_delay > 0:
        delay = rng.exponential(schedule.capture_delay, size=(n_traj, q, n_emit))
    else:
        delay = np.zeros((n_traj, q, n_emit))
    times = np.where(excited, pulse_t + delay, np.inf).reshape(n_traj, -1)
    sites = np.broadcast_to(np.arange(n_emit), (n_traj, q, n_emit)).reshape(n_traj, -1)
    order = np.argsort(times, axis=1, kind="stable")
    times = np.take_along_axis(times, order, axis=1)
    sites = np.take_along_axis(sites, order, axis=1)
    pad = np.full((n_traj, 1), np.inf)
    return np.hstack([times, pad]), np.hstack([sites, np.zeros((n_traj, 1), sites.dtype)])


def simulate_stream(system, schedule: ExcitationSchedule, duration, seed,
                    coupling="collective", n_trajectories=None) -> PhotonStream:
    """Photon stream from quantum-jump trajectories of ``system``.

    Waveguide jumps are recorded with channel 'waveguide', other radiative
    jumps as 'nonguided'. Pulsed runs cover floor(duration/period) pulses,
    split into consecutive blocks, one trajectory per block, each starting in
    the ground state. CW runs are a concatenation of independent segments of
    equal length, each started from a pure state sampled from the stationary
    density matrix, so the stream is stationary throughout. Deterministic in
    ``seed``.
    """
    system = as_system(system)
    if not duration > 0:
        raise ValueError("duration must be positive")
    gen = trajectory_generator(system, schedule, coupling)
    d, n = gen.dim, gen.n
    rng = make_rng(seed, 1)
    meta = {"mode": schedule.mode, "coupling": coupling, "n_emitters": n}

    if schedule.mode == "pulsed":
        n_pulses = int(math.floor(duration / schedule.period + 1e-9))
        if n_pulses < 1:
            raise ValueError("empty schedule: duration shorter than one period")
        m = n_trajectories or min(n_pulses, MAX_TRAJECTORIES)
        per = math.ceil(n_pulses / m)
        m = math.ceil(n_pulses / per)
        first = np.arange(m) * per
        count = np.minimum(per, n_pulses - first)
        offsets = first * schedule.period
        t_end = np.minimum(count * schedule.period, duration - offsets)
        ev_time, ev_site = _pulse_events(m, first, count, n, schedule, rng)
        psi = np.zeros((m, d), dtype=complex)
        psi[:, 0] = 1.0
        meta.update(n_pulses=n_pulses, period_ns=schedule.period)
    else:
        if schedule.repump <= 0:
            raise ValueError("empty schedule: cw mode needs a positive repump rate")
        m = n_trajectories or int(min(MAX_TRAJECTORIES, max(1, math.ceil(duration / CW_SEGMENT_NS))))
        seg = duration / m
        offsets = np.arange(m) * seg
        t_end = np.full(m, seg)
        ev_time = np.full((m, 1), np.inf)
        ev_site = np.zeros((m, 1), dtype=np.int64)
        rho = steady_state(gen)
        p, vecs = np.linalg.eigh(rho)
        p = np.clip(p, 0.0, None)
        pick = rng.choice(d, size=m, p=p / p.sum())
        psi = vecs[:, pick].T.copy()
        meta.update(segment_ns=seg)

    tr, tt, cc = _run(gen, psi, t_end, ev_time, ev_site, rng)
    times = offsets[tr] + tt
    keep = times <= duration
    times, cc = times[keep], cc[keep]
    order = np.lexsort((cc, times))
    meta["n_trajectories"] = int(m)
    return PhotonStream(times[order], cc[order], float(duration), seed, meta)


def add_background(stream: PhotonStream, seed, rate=0.0, pulsed=None) -> PhotonStream:
    """Merge uncorrelated background photons into a stream.

    ``rate`` adds a homogeneous Poisson process (1/ns). ``pulsed`` is a dict
    with ``period``, ``mean_per_pulse`` and ``decay_ns``: every pulse then
    emits a Poisson number of photons delayed by an exponential time.
    """
    rng = make_rng(seed, 2)
    extra = []
    if rate > 0:
        k = rng.poisson(rate * stream.duration)
        extra.append(np.sort(rng.random(k) * stream.duration))
    if pulsed:
        period = float(pulsed["period"])
        n_pulses = int(math.floor(stream.duration / period + 1e-9))
        counts = rng.poisson(float(pulsed["mean_per_pulse"]), size=n_pulses)
        base = np.repeat(np.arange(n_pulses) * period, counts)
        extra.append(base + rng.exponential(float(pulsed["decay_ns"]), size=base.size))
    if not extra:
        return stream
    meta = {"background_rate_per_ns": rate}
    if pulsed:
        meta["background_pulsed"] = dict(pulsed)
    return stream.merged(np.concatenate(extra), BACKGROUND, meta)


def background_rate_for_rho(signal_rate, rho):
    """Poisson background rate that leaves signal fraction ``rho`` of the counts."""
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    return signal_rate * (1.0 - rho) / rho
