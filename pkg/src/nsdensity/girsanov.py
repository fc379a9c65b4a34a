"""Stopping time, stochastic exponential and Monte-Carlo checks of its properties.

Sign convention: ``v^n`` carries the extra F-drift ``+pi_F(nu A v + B(v))``
relative to ``u``, so the density that removes it is

    G_t = exp( int h dW - 1/2 int |h|^2 ds ),   h = -S^+ pi_F (nu A v + B(v)),

frozen once the stopping integral reaches ``n``.  With a left-point ``h`` and
an exact Gaussian ``dW`` each discrete factor has expectation one, so the
discrete weight is an exact martingale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .integrator import Model
from .noise import pseudo_inverse_apply


@dataclass(frozen=True)
class GirsanovWeight:
    log_g: float
    stopping_integral: float
    n_threshold: float
    stopped: bool

    @classmethod
    def start(cls, n_threshold: float) -> "GirsanovWeight":
        if n_threshold < 0:
            raise ValueError("threshold must be nonnegative")
        return cls(log_g=0.0, stopping_integral=0.0, n_threshold=float(n_threshold),
                   stopped=n_threshold <= 0.0)

    @property
    def density(self) -> float:
        return math.exp(self.log_g)


def drift_functional(state: np.ndarray, model: Model) -> np.ndarray:
    """S^+ pi_F (nu A w + B(w, w)) as a full coefficient vector."""
    d = model.drift(np.asarray(state, dtype=float))
    return pseudo_inverse_apply(model.cov, model.F, model.F.project(d))


def update_weight(weight: GirsanovWeight, state: np.ndarray, increment: np.ndarray,
                  dt: float, model: Model) -> GirsanovWeight:
    """Accumulate one step; ``increment`` is the colored ``pi_N S dW`` fed to
    the integrator for the same step."""
    if weight.stopped:
        return weight
    Fi = model.F.index_array
    h = -drift_functional(state, model)[Fi]
    dW = np.asarray(increment)[Fi] / model.cov.sigmas[Fi]
    h2 = float(h @ h)
    integral = weight.stopping_integral + h2 * dt
    return replace(weight, log_g=weight.log_g + float(h @ dW) - 0.5 * h2 * dt,
                   stopping_integral=integral, stopped=integral >= weight.n_threshold)


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    stderr: float

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.stderr


def _mean(x) -> MeanEstimate:
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return MeanEstimate(float(x.mean()) if len(x) else 0.0, 0.0)
    return MeanEstimate(float(math.fsum(x) / len(x)), float(x.std(ddof=1) / math.sqrt(len(x))))


def martingale_diagnostic(log_g_t: np.ndarray) -> MeanEstimate:
    """MC mean of G_t; a martingale started at 1 keeps it at 1."""
    return _mean(np.exp(log_g_t))


@dataclass(frozen=True)
class LogMoment:
    lhs: float
    stderr: float
    rhs_shape: float


def log_moment_diagnostic(log_g_s: np.ndarray, log_g_t: np.ndarray, s: float, t: float,
                          x0_norm: float) -> LogMoment:
    """E[G_t |log(G_t / G_s)|] with the bound's shape sqrt(t - s)(1 + |x0|^2)^2."""
    if not 0 <= s <= t:
        raise ValueError("need 0 <= s <= t")
    vals = np.exp(log_g_t) * np.abs(np.asarray(log_g_t) - np.asarray(log_g_s))
    m = _mean(vals)
    return LogMoment(lhs=m.mean, stderr=m.stderr,
                     rhs_shape=math.sqrt(t - s) * (1.0 + x0_norm ** 2) ** 2)


@dataclass(frozen=True)
class IncrementCheck:
    value: float
    stderr: float
    mean_increment: MeanEstimate
    log_moment: float

    @property
    def martingale_ok(self) -> bool:
        return self.mean_increment.within(0.0)


def increment_diagnostic(log_g_s: np.ndarray, log_g_t: np.ndarray, X: np.ndarray | float) -> IncrementCheck:
    """|E[(G_t - G_s) X]| for a test variable with |X| <= 1."""
    Gs, Gt = np.exp(log_g_s), np.exp(log_g_t)
    X = np.broadcast_to(np.asarray(X, dtype=float), Gs.shape)
    if np.max(np.abs(X), initial=0.0) > 1.0 + 1e-12:
        raise ValueError("test variable must be bounded by 1")
    prod = _mean((Gt - Gs) * X)
    lm = _mean(Gt * np.abs(np.asarray(log_g_t) - np.asarray(log_g_s)))
    return IncrementCheck(value=abs(prod.mean), stderr=prod.stderr,
                          mean_increment=_mean(Gt - Gs), log_moment=lm.mean)


def stopping_probability(integral_t: np.ndarray, n_values) -> dict[float, float]:
    """P[tau_n <= t] read off the stopping integral recorded at time t."""
    integral_t = np.asarray(integral_t, dtype=float)
    return {float(n): float(np.mean(integral_t >= n)) for n in n_values}


@dataclass(frozen=True)
class TransferCheck:
    direct: MeanEstimate
    weighted: MeanEstimate

    @property
    def gap(self) -> float:
        return abs(self.direct.mean - self.weighted.mean)

    @property
    def stderr(self) -> float:
        return math.hypot(self.direct.stderr, self.weighted.stderr)

    def ok(self, k: float = 3.0) -> bool:
        return self.gap <= k * self.stderr


def transfer_check(phi, u_F_t: np.ndarray, vn_F_t: np.ndarray, log_g_t: np.ndarray) -> TransferCheck:
    """E[phi(pi_F u(t))] against E[G_t phi(pi_F v^n(t))] on independent ensembles."""
    return TransferCheck(direct=_mean(phi(u_F_t)), weighted=_mean(np.exp(log_g_t) * phi(vn_F_t)))


def elementary_inequality_gap(x, y, eps) -> np.ndarray:
    """eps e^{y/eps} + eps x log x - x y; nonnegative where the inequality holds."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    xlogx = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)
    return eps * np.exp(y / eps) + eps * xlogx - x * y
