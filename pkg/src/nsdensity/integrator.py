"""Exponential Euler-Maruyama for the Galerkin system and its three companions.

One step maps ``u`` to ``exp(-nu A dt) (u - dt B(u, u)) + xi`` where ``xi`` is
the exact noise increment ``pi_N S dW``.  The four variants differ only in
which F-coordinates receive that drift:

* ``full_u``        every coordinate;
* ``reduced_v``     F-coordinates get noise only, so ``pi_F v`` is an exact
                    discrete Brownian motion;
* ``truncated_vn``  like ``reduced_v`` while the stopping integral is below
                    ``n`` (left-point rule), like ``full_u`` afterwards;
* ``killed_u_eps``  like ``full_u`` on steps starting before ``t - eps``,
                    like ``reduced_v`` afterwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import SpectralBasis, nonlinear_term
from .noise import CovarianceSpec, SubspaceF

FULL_U = "full_u"
REDUCED_V = "reduced_v"
TRUNCATED_VN = "truncated_vn"
KILLED_U_EPS = "killed_u_eps"
TAGS = (FULL_U, REDUCED_V, TRUNCATED_VN, KILLED_U_EPS)

BLOWUP_NORM = 1e6


class BlowUpError(RuntimeError):
    pass


@dataclass(frozen=True)
class SystemVariant:
    tag: str = FULL_U
    n: float | None = None
    t: float | None = None
    eps: float | None = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown variant {self.tag!r}")
        if self.tag == TRUNCATED_VN and not (self.n is not None and self.n >= 0):
            raise ValueError("truncated_vn needs a threshold n >= 0")
        if self.tag == KILLED_U_EPS:
            if self.t is None or self.eps is None or not 0 < self.eps < self.t:
                raise ValueError("killed_u_eps needs 0 < eps < t")

    @classmethod
    def full(cls):
        return cls(FULL_U)

    @classmethod
    def reduced(cls):
        return cls(REDUCED_V)

    @classmethod
    def truncated(cls, n: float):
        return cls(TRUNCATED_VN, n=n)

    @classmethod
    def killed(cls, t: float, eps: float):
        return cls(KILLED_U_EPS, t=t, eps=eps)

    def kill_step(self, dt: float) -> int:
        """Index of the first step whose F-drift is switched off."""
        return int(round((self.t - self.eps) / dt))


@dataclass(frozen=True, eq=False)
class Model:
    basis: SpectralBasis
    cov: CovarianceSpec
    F: SubspaceF
    nu: float = 1.0
    nonlinear: bool = True

    def __post_init__(self):
        if self.cov.size != self.basis.size:
            raise ValueError("covariance and basis sizes differ")
        self.F.mask(self.basis.size)

    @property
    def size(self) -> int:
        return self.basis.size

    def decay(self, dt: float) -> np.ndarray:
        return np.exp(-self.nu * self.basis.eigenvalues * dt)

    def nonlinearity(self, u: np.ndarray) -> np.ndarray:
        if not self.nonlinear:
            return np.zeros_like(u)
        return nonlinear_term(self.basis, u)

    def drift(self, u: np.ndarray, nl: np.ndarray | None = None) -> np.ndarray:
        """nu A u + B(u, u)."""
        if nl is None:
            nl = self.nonlinearity(u)
        return self.nu * self.basis.eigenvalues * u + nl


def _advance(model: Model, u, nl, decay, dt, xi, f_full):
    """Shared update; ``f_full`` (bool per path) selects full F-dynamics."""
    new = decay * (u - dt * nl) + xi
    if not np.all(f_full):
        idx = model.F.index_array
        keep = ~np.asarray(f_full)
        if new.ndim == 1:
            new[idx] = u[idx] + xi[idx]
        else:
            rows = np.flatnonzero(keep)
            new[np.ix_(rows, idx)] = u[np.ix_(rows, idx)] + xi[np.ix_(rows, idx)]
    return new


def step(model: Model, state: np.ndarray, variant: SystemVariant, dt: float,
         increment: np.ndarray, weight=None, step_index: int = 0) -> np.ndarray:
    """Advance one state by ``dt`` using the colored increment ``pi_N S dW``.

    ``weight`` (a ``GirsanovWeight``) supplies the indicator for
    ``truncated_vn``; ``step_index`` locates the step for ``killed_u_eps``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    state = np.asarray(state, dtype=float)
    nl = model.nonlinearity(state)
    if variant.tag == FULL_U:
        f_full = True
    elif variant.tag == REDUCED_V:
        f_full = False
    elif variant.tag == TRUNCATED_VN:
        if weight is None:
            raise ValueError("truncated_vn step needs the current Girsanov weight")
        f_full = bool(weight.stopped)
    else:
        f_full = step_index < variant.kill_step(dt)
    new = _advance(model, state, nl, model.decay(dt), dt, np.asarray(increment, dtype=float), f_full)
    norm = float(np.linalg.norm(new))
    if not math.isfinite(norm) or norm > BLOWUP_NORM:
        raise BlowUpError(f"|u|_H = {norm:.3g} exceeds guard {BLOWUP_NORM:g}")
    return new


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    weight_log: np.ndarray | None = None
    stopping_integral: np.ndarray | None = None
    tau_hit: float | None = None
    blown_up: bool = False


def time_grid(T: float, dt: float) -> int:
    """Number of steps; rejects a dt that does not divide T."""
    if T <= 0 or dt <= 0:
        raise ValueError("need T > 0 and dt > 0")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"dt={dt} does not divide T={T}")
    return n


def noise_path(cov: CovarianceSpec, dt: float, nsteps: int, rng: np.random.Generator) -> np.ndarray:
    """Colored increments for ``nsteps`` steps, consuming ``rng`` in step order."""
    return cov.sigmas * math.sqrt(dt) * rng.standard_normal((nsteps, cov.size))


def simulate(model: Model, x0: np.ndarray, variant: SystemVariant, T: float, dt: float,
             noise: np.ndarray | None = None, seed: int | None = None) -> Trajectory:
    """One full trajectory on the uniform grid ``0, dt, ..., T``.

    Pass the same ``noise`` (colored increments, shape (nsteps, M)) to
    several variants to couple them pathwise.  A blow-up stops the
    integration and marks the trajectory; the remaining states repeat the
    last finite one.
    """
    from .girsanov import GirsanovWeight, update_weight

    nsteps = time_grid(T, dt)
    if noise is None:
        noise = noise_path(model.cov, dt, nsteps, np.random.Generator(np.random.PCG64(seed)))
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (nsteps, model.size):
        raise ValueError(f"noise path must have shape {(nsteps, model.size)}")
    states = np.empty((nsteps + 1, model.size))
    states[0] = x0
    weighted = variant.tag == TRUNCATED_VN
    weight = GirsanovWeight.start(variant.n) if weighted else None
    logs = np.zeros(nsteps + 1) if weighted else None
    integ = np.zeros(nsteps + 1) if weighted else None
    tau = None
    blown = False
    for k in range(nsteps):
        u = states[k]
        try:
            new = step(model, u, variant, dt, noise[k], weight=weight, step_index=k)
        except BlowUpError:
            blown = True
            states[k + 1:] = u
            if weighted:
                logs[k + 1:] = logs[k]
                integ[k + 1:] = integ[k]
            break
        if weighted:
            was_stopped = weight.stopped
            weight = update_weight(weight, u, noise[k], dt, model)
            logs[k + 1] = weight.log_g
            integ[k + 1] = weight.stopping_integral
            if weight.stopped and not was_stopped:
                tau = (k + 1) * dt
        states[k + 1] = new
    if weighted and weight.n_threshold <= 0:
        tau = 0.0
    return Trajectory(times=np.arange(nsteps + 1) * dt, states=states, weight_log=logs,
                      stopping_integral=integ, tau_hit=tau, blown_up=blown)


@dataclass
class BatchRecord:
    """What a batch run keeps: selected coordinates at selected steps."""

    steps: np.ndarray
    states: np.ndarray          # (b, len(steps), len(indices))
    log_g: np.ndarray           # (b, len(steps))
    integral: np.ndarray        # (b, len(steps))
    sup_norm: np.ndarray        # (b,) max over the grid of |u|_H
    tau_step: np.ndarray        # (b,) first step index with integral >= n, -1 if never
    blown: np.ndarray           # (b,) bool
    extra: dict = field(default_factory=dict)


def integrate_batch(model: Model, x0: np.ndarray, variant: SystemVariant, dt: float, nsteps: int,
                    generators: list, record_steps, record_indices=None,
                    weight_threshold: float | None = None, block: int = 64) -> BatchRecord:
    """Integrate one path per generator, drawing standard normals blockwise.

    Each generator is consumed in step order exactly as ``noise_path`` would,
    so path ``i`` here matches ``simulate`` driven by the same stream.  The
    Girsanov weight is tracked for ``truncated_vn`` (threshold ``variant.n``)
    and, when ``weight_threshold`` is given, for ``reduced_v``: before the
    stopping time the two variants coincide, so the weight along ``v`` is
    the weight along ``v^n``.
    """
    b = len(generators)
    M = model.size
    record_steps = np.asarray(sorted(set(int(s) for s in record_steps)), dtype=np.int64)
    if len(record_steps) and (record_steps[0] < 0 or record_steps[-1] > nsteps):
        raise ValueError("record step outside the grid")
    idx = np.arange(M) if record_indices is None else np.asarray(record_indices, dtype=np.int64)
    slot = {int(s): j for j, s in enumerate(record_steps)}

    tag = variant.tag
    threshold = variant.n if tag == TRUNCATED_VN else weight_threshold
    track = threshold is not None and tag in (TRUNCATED_VN, REDUCED_V)
    Fi = model.F.index_array
    sig_F = model.cov.sigmas[Fi]
    decay = model.decay(dt)
    sqdt = math.sqrt(dt)
    kill = variant.kill_step(dt) if tag == KILLED_U_EPS else None

    u = np.tile(np.asarray(x0, dtype=float), (b, 1))
    out_states = np.zeros((b, len(record_steps), len(idx)))
    out_log = np.zeros((b, len(record_steps)))
    out_int = np.zeros((b, len(record_steps)))
    log_g = np.zeros(b)
    integral = np.zeros(b)
    stopped = np.zeros(b, dtype=bool) if not track else (integral >= threshold)
    tau_step = np.where(stopped, 0, -1).astype(np.int64)
    blown = np.zeros(b, dtype=bool)
    sup_norm = np.linalg.norm(u, axis=1)

    def record(k):
        j = slot.get(k)
        if j is not None:
            out_states[:, j] = u[:, idx]
            out_log[:, j] = log_g
            out_int[:, j] = integral

    record(0)
    z = None
    for k in range(nsteps):
        if k % block == 0:
            nb = min(block, nsteps - k)
            z = np.stack([g.standard_normal((nb, M)) for g in generators], axis=1)
        zk = z[k % block]
        xi = model.cov.sigmas * sqdt * zk
        nl = model.nonlinearity(u)
        if tag == FULL_U:
            f_full = np.ones(b, dtype=bool)
        elif tag == REDUCED_V:
            f_full = np.zeros(b, dtype=bool)
        elif tag == TRUNCATED_VN:
            f_full = stopped.copy()
        else:
            f_full = np.full(b, k < kill)
        new = _advance(model, u, nl, decay, dt, xi, f_full)
        if track:
            active = ~stopped & ~blown
            drift_F = model.nu * model.basis.eigenvalues[Fi] * u[:, Fi] + nl[:, Fi]
            h = -drift_F / sig_F
            h2 = np.sum(h * h, axis=1)
            log_g = log_g + active * (sqdt * np.sum(h * zk[:, Fi], axis=1) - 0.5 * h2 * dt)
            integral = integral + active * h2 * dt
            newly = active & (integral >= threshold)
            tau_step[newly & ~blown] = k + 1
            stopped = stopped | newly
        norms = np.linalg.norm(new, axis=1)
        bad = ~np.isfinite(norms) | (norms > BLOWUP_NORM)
        blown_now = bad & ~blown
        blown |= blown_now
        # blown rows keep their last finite state
        u = np.where(blown[:, None], u, new)
        sup_norm = np.maximum(sup_norm, np.where(blown, 0.0, norms))
        record(k + 1)
    return BatchRecord(steps=record_steps, states=out_states, log_g=out_log, integral=out_int,
                       sup_norm=sup_norm, tau_step=tau_step, blown=blown)


@dataclass(frozen=True)
class EnergyMoment:
    lhs: float
    half_lhs: float
    c_p: float
    bound_ok: bool


def energy_moment_check(sup_norms: np.ndarray, p: float, x0_norm: float,
                        rel_tol: float = 0.1) -> EnergyMoment:
    """E[sup_t |u(t)|_H^p] from per-path sup norms, with ``c_p`` calibrated so
    that lhs = c_p (1 + |x0|^p).  The bound is taken as stable when the first
    half of the ensemble agrees with the whole within ``rel_tol``."""
    if p <= 0:
        raise ValueError("p must be positive")
    x = np.asarray(sup_norms, dtype=float) ** p
    if len(x) < 2:
        raise ValueError("need at least two paths")
    lhs = float(x.mean())
    half = float(x[: len(x) // 2].mean())
    finite = bool(np.isfinite(lhs))
    stable = lhs == half or (finite and abs(half - lhs) <= rel_tol * abs(lhs))
    return EnergyMoment(lhs=lhs, half_lhs=half, c_p=lhs / (1.0 + x0_norm ** p),
                        bound_ok=finite and stable)
