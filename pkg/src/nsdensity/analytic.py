"""Closed-form Gaussian tools and Monte-Carlo checks of the Markov, Brownian and truncation identities."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import special, stats
from scipy.integrate import trapezoid

from .density import DensityEstimate, Grid, besov_distance, l1_distance


@dataclass(frozen=True)
class HeatKernelSpec:
    covariance: np.ndarray
    t: float

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if c.shape[0] != c.shape[1] or not np.allclose(c, c.T):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(c).min() <= 0:
            raise ValueError("covariance must be positive definite")
        if self.t < 0:
            raise ValueError("t must be nonnegative")
        object.__setattr__(self, "covariance", c)

    @property
    def d(self) -> int:
        return self.covariance.shape[0]


def _gauss_rule(d: int, order: int):
    x, w = hermegauss(order)
    w = w / w.sum()
    nodes = np.array(list(itertools.product(x, repeat=d)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=d))), axis=1)
    return nodes, weights


def heat_solution(phi, points: np.ndarray, spec: HeatKernelSpec, order: int = 24) -> np.ndarray:
    """U_phi(t, y) = E[phi(y + sqrt(t) L Z)], L L^T = covariance, by tensor
    Gauss-Hermite quadrature.  The weights are positive and sum to one, so
    |U_phi|_inf <= |phi|_inf holds exactly."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[-1] != spec.d:
        pts = pts.reshape(-1, spec.d)
    if spec.t == 0:
        return np.asarray(phi(pts), dtype=float)
    nodes, weights = _gauss_rule(spec.d, order)
    L = np.linalg.cholesky(spec.covariance)
    offsets = math.sqrt(spec.t) * nodes @ L.T
    vals = phi((pts[:, None, :] + offsets[None]).reshape(-1, spec.d)).reshape(len(pts), len(weights))
    return vals @ weights


def gaussian_density(points: np.ndarray, mean, cov) -> np.ndarray:
    return stats.multivariate_normal(mean=np.atleast_1d(mean), cov=np.atleast_2d(cov)).pdf(points)


@dataclass(frozen=True)
class GapEstimate:
    lhs: float
    rhs: float
    gap: float
    stderr: float

    def ok(self, k: float = 3.0) -> bool:
        return abs(self.gap) <= k * self.stderr or self.gap == 0.0


def markov_rep_check(log_g_s: np.ndarray, beta_s: np.ndarray, beta_t: np.ndarray, phi,
                     covariance: np.ndarray, gap: float, order: int = 24) -> GapEstimate:
    """E[G_s phi(beta_t)] against E[G_s U_phi(t - s, beta_s)] on the same paths."""
    Gs = np.exp(log_g_s)
    a = Gs * phi(np.atleast_2d(beta_t.T).T if beta_t.ndim == 1 else beta_t)
    U = heat_solution(phi, beta_s, HeatKernelSpec(covariance, gap), order=order)
    b = Gs * U
    diff = a - b
    n = len(diff)
    return GapEstimate(lhs=float(a.mean()), rhs=float(b.mean()), gap=float(diff.mean()),
                       stderr=float(diff.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0)


def difference_operator(phi, x: np.ndarray, h: np.ndarray, n: int) -> np.ndarray:
    """Delta_h^n phi at points x (m, d)."""
    h = np.asarray(h, dtype=float)
    out = np.zeros(len(x))
    for j in range(n + 1):
        out += (-1) ** (n - j) * special.comb(n, j, exact=True) * phi(x + j * h)
    return out


@dataclass(frozen=True)
class BrownianDiff:
    lhs: float
    stderr: float
    bound_shape: float


def brownian_diff_check(a, r: float, s: float, h, n: int, phi, covariance: np.ndarray,
                        samples: int, rng: np.random.Generator, phi_sup: float = 1.0) -> BrownianDiff:
    """|E[Delta_h^n phi(a + beta_r) - Delta_h^n phi(a + beta_s)]| with common
    random numbers, beta a Brownian motion with the given spatial covariance."""
    if r <= 0 or s <= 0:
        raise ValueError("need r, s > 0")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    h = np.atleast_1d(np.asarray(h, dtype=float))
    hn = float(np.linalg.norm(h))
    if hn > 1.0:
        raise ValueError("|h| must be at most 1")
    bound = phi_sup / max(r, s) * (hn / math.sqrt(min(r, s))) ** n * abs(r - s)
    if r == s or hn == 0.0:
        return BrownianDiff(0.0, 0.0, bound)
    L = np.linalg.cholesky(np.atleast_2d(covariance))
    Z = rng.standard_normal((samples, len(a))) @ L.T
    dr = difference_operator(phi, a + math.sqrt(r) * Z, h, n)
    ds = difference_operator(phi, a + math.sqrt(s) * Z, h, n)
    diff = dr - ds
    return BrownianDiff(lhs=float(abs(diff.mean())), stderr=float(diff.std(ddof=1) / math.sqrt(samples)),
                        bound_shape=bound)


@dataclass(frozen=True)
class TruncationRow:
    n_threshold: float
    value: float
    stderr: float
    tail_probability: float
    bound_shape: float


def truncation_diagnostic(phi, v_F_t: np.ndarray, runs: dict, v_integral_t: np.ndarray,
                          eps_grid, T: float, x0_norm: float, c_log: float = 1.0) -> list[TruncationRow]:
    """|E[G_s^n (phi(pi_F v^n(t)) - phi(pi_F v(t)))]| for each threshold.

    ``runs`` maps a threshold n to ``(log_g_s, vn_F_t)`` from a truncated run
    sharing noise with the reduced run that produced ``v_F_t``.
    """
    pv = phi(v_F_t)
    rows = []
    for n in sorted(runs):
        log_g_s, vn_t = runs[n]
        vals = np.exp(log_g_s) * (phi(vn_t) - pv)
        p = float(np.mean(np.asarray(v_integral_t) >= n))
        bound = min(e * (c_log * math.sqrt(T) * (1 + x0_norm ** 2) ** 2 + math.exp(min(2.0 / e, 700.0)) * p)
                    for e in eps_grid)
        rows.append(TruncationRow(n_threshold=float(n), value=float(abs(vals.mean())),
                                  stderr=float(vals.std(ddof=1) / math.sqrt(len(vals))),
                                  tail_probability=p, bound_shape=bound))
    return rows


def numgirsanov_quantity(psi, u_s, u_t, v_s, v_t) -> tuple[float, float]:
    """|E[psi(u_t) - psi(u_s)] - E[psi(v_t) - psi(v_s)]| on coupled paths, with stderr."""
    diff = (psi(u_t) - psi(u_s)) - (psi(v_t) - psi(v_s))
    return float(abs(diff.mean())), float(diff.std(ddof=1) / math.sqrt(len(diff)))


# -- Ornstein-Uhlenbeck closed forms (nonlinearity switched off) ---------

def ou_moments(x0, sigmas, eigenvalues, nu: float, t: float):
    """Mean and variance per coordinate of du = -nu lambda u dt + sigma dW."""
    x0, sigmas, lam = (np.asarray(a, dtype=float) for a in (x0, sigmas, eigenvalues))
    rate = nu * lam
    mean = x0 * np.exp(-rate * t)
    var = sigmas ** 2 * -np.expm1(-2.0 * rate * t) / (2.0 * rate)
    return mean, var


def ou_discrete_variance(sigmas, eigenvalues, nu: float, dt: float, nsteps: int) -> np.ndarray:
    """Variance after ``nsteps`` of u' = e^{-nu lambda dt} u + sigma dW."""
    q = np.exp(-2.0 * nu * np.asarray(eigenvalues) * dt)
    return np.asarray(sigmas) ** 2 * dt * (1.0 - q ** nsteps) / (1.0 - q)


def gaussian_l1_1d_equal_var(delta_mean: float, sd: float) -> float:
    """|N(0, sd^2) - N(delta, sd^2)|_L1 = 2 (2 Phi(delta / (2 sd)) - 1)."""
    return 2.0 * (2.0 * stats.norm.cdf(abs(delta_mean) / (2.0 * sd)) - 1.0)


def gaussian_on_grid(grid: Grid, mean, var, subcells: int = 1) -> DensityEstimate:
    """Diagonal Gaussian density averaged over each cell (exact via the CDF)."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    sd = np.sqrt(np.atleast_1d(np.asarray(var, dtype=float)))
    factors = []
    for a in range(grid.d):
        cdf = stats.norm.cdf(grid.edges(a), loc=mean[a], scale=sd[a])
        factors.append(np.diff(cdf) / grid.width)
    vals = factors[0]
    for f in factors[1:]:
        vals = np.multiply.outer(vals, f)
    return DensityEstimate(grid=grid, values=vals, sample_count=0)


def gaussian_l1_distance(mean1, var1, mean2, var2, points: int = 2001) -> float:
    """L1 distance of two diagonal Gaussians in d <= 2 by fine-grid quadrature."""
    mean1, mean2 = np.atleast_1d(mean1).astype(float), np.atleast_1d(mean2).astype(float)
    var1, var2 = np.atleast_1d(var1).astype(float), np.atleast_1d(var2).astype(float)
    sd = np.sqrt(np.maximum(var1, var2))
    lo = np.minimum(mean1, mean2) - 10 * sd
    hi = np.maximum(mean1, mean2) + 10 * sd
    axes = [np.linspace(l, h, points) for l, h in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    f = np.prod(stats.norm.pdf(mesh, loc=mean1, scale=np.sqrt(var1)), axis=-1)
    g = np.prod(stats.norm.pdf(mesh, loc=mean2, scale=np.sqrt(var2)), axis=-1)
    integrand = np.abs(f - g)
    for ax in reversed(axes):
        integrand = trapezoid(integrand, ax, axis=-1)
    return float(integrand)


def gaussian_besov_distance(grid: Grid, mean1, var1, mean2, var2, alpha: float, n: int = 1) -> float:
    """Besov distance of two cell-averaged Gaussians on ``grid``."""
    return besov_distance(gaussian_on_grid(grid, mean1, var1), gaussian_on_grid(grid, mean2, var2), alpha, n)


def gaussian_grid_l1(grid: Grid, mean1, var1, mean2, var2) -> float:
    return l1_distance(gaussian_on_grid(grid, mean1, var1), gaussian_on_grid(grid, mean2, var2))
