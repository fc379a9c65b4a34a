"""Diagonal trace-class covariance, noise sampling and the pseudo-inverse on F."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import SpectralBasis

NONDEGENERACY_TOL = 1e-14


class NonDegeneracyError(ValueError):
    """The covariance cannot reach every direction of F."""


@dataclass(frozen=True, eq=False)
class CovarianceSpec:
    """Noise amplitudes ``sigma_i = sigma0 * lambda_i**(-gamma)`` on the basis.

    The noise eigenbasis coincides with the Stokes eigenbasis, so ``S`` is
    diagonal in coefficient space.
    """

    sigmas: np.ndarray
    gamma: float = 1.0
    sigma0: float = 1.0

    @classmethod
    def from_basis(cls, basis: SpectralBasis, gamma: float = 1.0, sigma0: float = 1.0):
        if gamma < 0 or sigma0 <= 0:
            raise ValueError("need gamma >= 0 and sigma0 > 0")
        sigmas = sigma0 * basis.eigenvalues ** (-gamma)
        return cls(sigmas=sigmas, gamma=gamma, sigma0=sigma0)

    @property
    def size(self) -> int:
        return len(self.sigmas)

    @property
    def trace(self) -> float:
        """sigma^2 = Tr(S S*) at this cutoff."""
        return float(np.sum(self.sigmas ** 2))

    def with_sigmas(self, sigmas) -> "CovarianceSpec":
        return CovarianceSpec(sigmas=np.asarray(sigmas, dtype=float), gamma=self.gamma,
                              sigma0=self.sigma0)


@dataclass(frozen=True)
class SubspaceF:
    """Span of the basis elements listed in ``indices``."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ValueError("F must be nonempty")
        if len(set(idx)) != len(idx) or min(idx) < 0:
            raise ValueError(f"F indices must be distinct and nonnegative: {idx}")
        object.__setattr__(self, "indices", idx)

    @property
    def d(self) -> int:
        return len(self.indices)

    @property
    def index_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)

    def mask(self, size: int) -> np.ndarray:
        if max(self.indices) >= size:
            raise ValueError(f"F index {max(self.indices)} outside basis of size {size}")
        m = np.zeros(size, dtype=bool)
        m[self.index_array] = True
        return m

    def project(self, states: np.ndarray) -> np.ndarray:
        """F-coordinates of a state (M,) or batch (..., M)."""
        return np.asarray(states)[..., self.index_array]

    def embed(self, f: np.ndarray, size: int) -> np.ndarray:
        out = np.zeros(size)
        out[self.index_array] = f
        return out


def sample_increment(cov: CovarianceSpec, dt: float, rng: np.random.Generator,
                     size: int | None = None) -> np.ndarray:
    """pi_N S (W(t + dt) - W(t)); shape (M,) or (size, M)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    shape = (cov.size,) if size is None else (size, cov.size)
    return cov.sigmas * np.sqrt(dt) * rng.standard_normal(shape)


def _check_reachable(cov: CovarianceSpec, F: SubspaceF) -> np.ndarray:
    s = cov.sigmas[F.index_array]
    bad = np.flatnonzero(np.abs(s) <= NONDEGENERACY_TOL)
    if len(bad):
        raise NonDegeneracyError(
            f"S x = f has no solution for f along basis elements {F.index_array[bad].tolist()}")
    return s


def pseudo_inverse_apply(cov: CovarianceSpec, F: SubspaceF, f: np.ndarray) -> np.ndarray:
    """Minimal-norm x with S x = f for f given in F-coordinates (d,) or (..., d)."""
    s = _check_reachable(cov, F)
    f = np.asarray(f, dtype=float)
    out = np.zeros(f.shape[:-1] + (cov.size,))
    out[..., F.index_array] = f / s
    return out


@dataclass(frozen=True)
class ProjectedCovariance:
    matrix: np.ndarray
    min_eigenvalue: float

    @property
    def positive_definite(self) -> bool:
        return self.min_eigenvalue > 0.0


def projected_covariance(cov: CovarianceSpec, F: SubspaceF) -> ProjectedCovariance:
    """pi_F S S* pi_F as a d x d matrix."""
    m = np.diag(cov.sigmas[F.index_array] ** 2)
    return ProjectedCovariance(matrix=m, min_eigenvalue=float(np.linalg.eigvalsh(m).min()))


@dataclass(frozen=True)
class AssumptionReport:
    hpbesov: bool
    hpgirsanov2: bool
    condition_number: float


def check_assumptions(cov: CovarianceSpec, F: SubspaceF, N: int | None = None) -> AssumptionReport:
    N = cov.size if N is None else N
    if max(F.indices) >= N:
        raise ValueError("F is not contained in H_N")
    s = np.abs(cov.sigmas[F.index_array])
    reachable = bool(np.all(s > NONDEGENERACY_TOL))
    pc = projected_covariance(cov, F)
    eig = np.linalg.eigvalsh(pc.matrix)
    nonsingular = bool(eig.min() > 0.0)
    cond = float(eig.max() / eig.min()) if nonsingular else float("inf")
    return AssumptionReport(hpbesov=nonsingular, hpgirsanov2=reachable, condition_number=cond)
