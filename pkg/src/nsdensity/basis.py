"""Divergence-free real Fourier basis on the torus [0, 2pi)^3.

Each canonical wavevector ``k`` (the lexicographically larger of ``k`` and
``-k``) carries four real fields ``c * p * cos(k.x)`` and ``c * p * sin(k.x)``
for two polarization vectors ``p`` orthogonal to ``k``.  The constant
``c = sqrt(2 / (2 pi)^3)`` makes the family orthonormal for the plain L2
inner product on the torus, so the H inner product of two states is the
Euclidean product of their coefficient vectors.

The Galerkin nonlinearity is evaluated with a tensor-product quadrature of
``3K + 1`` points per axis.  Every integrand that appears (a basis field times
a product of two fields of degree at most ``K``) is a trigonometric polynomial
of degree at most ``3K`` per axis, which that rule integrates exactly, so the
result is the exact truncated mode convolution, not a pseudospectral
approximation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi
NORMALIZATION = np.sqrt(2.0) / TWO_PI ** 1.5

COS, SIN = 0, 1
PARITY_NAMES = ("cos", "sin")

# pairs (i, j), i <= j, of the symmetric tensor u_i u_j
_SYM_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


@dataclass(frozen=True)
class BasisElement:
    index: int
    wavevector: tuple[int, int, int]
    parity: str
    polarization: int
    eigenvalue: float
    direction: tuple[float, float, float]


def canonical_wavevectors(cutoff: int) -> list[tuple[int, int, int]]:
    """Nonzero k with |k|_inf <= cutoff, one representative per pair {k, -k}."""
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    out = []
    for k in itertools.product(range(-cutoff, cutoff + 1), repeat=3):
        if k == (0, 0, 0):
            continue
        if k > tuple(-c for c in k):
            out.append(k)
    return out


def polarization_pair(k) -> tuple[np.ndarray, np.ndarray]:
    """Two orthonormal vectors orthogonal to ``k``, chosen deterministically."""
    k = np.asarray(k, dtype=float)
    nonzero = np.flatnonzero(k)
    if len(nonzero) == 1:
        axes = [a for a in range(3) if a != nonzero[0]]
        return np.eye(3)[axes[0]], np.eye(3)[axes[1]]
    khat = k / np.linalg.norm(k)
    for ref in (np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0])):
        p1 = ref - (ref @ khat) * khat
        norm = np.linalg.norm(p1)
        if norm > 1e-8:
            p1 = p1 / norm
            return p1, np.cross(khat, p1)
    raise AssertionError("unreachable: no reference vector independent of k")


def leray_project(k, field_hat) -> np.ndarray:
    """Apply I - k k^T / |k|^2 to a (complex) Fourier coefficient vector."""
    k = np.asarray(k, dtype=float)
    k2 = k @ k
    if k2 == 0.0:
        raise ValueError("Leray projector undefined at k = 0")
    field_hat = np.asarray(field_hat)
    return field_hat - k * (k @ field_hat) / k2


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    cutoff: int
    wavevectors: np.ndarray     # (M, 3) int
    parities: np.ndarray        # (M,) 0 = cos, 1 = sin
    polarizations: np.ndarray   # (M,) 1 or 2
    directions: np.ndarray      # (M, 3) unit polarization vectors
    eigenvalues: np.ndarray     # (M,) |k|^2

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    def __len__(self) -> int:
        return self.size

    def element(self, i: int) -> BasisElement:
        return BasisElement(
            index=i,
            wavevector=tuple(int(c) for c in self.wavevectors[i]),
            parity=PARITY_NAMES[self.parities[i]],
            polarization=int(self.polarizations[i]),
            eigenvalue=float(self.eigenvalues[i]),
            direction=tuple(float(c) for c in self.directions[i]),
        )

    @property
    def elements(self) -> list[BasisElement]:
        return [self.element(i) for i in range(self.size)]

    def find(self, k, parity="cos", polarization=1) -> int:
        """Index of the element with the given canonical wavevector."""
        p = PARITY_NAMES.index(parity)
        hit = np.flatnonzero(
            np.all(self.wavevectors == np.asarray(k), axis=1)
            & (self.parities == p)
            & (self.polarizations == polarization)
        )
        if len(hit) != 1:
            raise KeyError(f"no basis element for k={k}, {parity}, pol {polarization}")
        return int(hit[0])

    # -- physical-space evaluation -------------------------------------

    def fields(self, points: np.ndarray) -> np.ndarray:
        """Basis fields at ``points`` (..., 3); returns (M, 3, ...)."""
        phase = np.tensordot(self.wavevectors.astype(float), points, axes=([1], [-1]))
        shape = (self.size,) + (1,) * (phase.ndim - 1)
        scalar = np.where(self.parities.reshape(shape) == COS, np.cos(phase), np.sin(phase))
        return NORMALIZATION * self.directions.reshape(self.size, 3, *shape[1:]) * scalar[:, None]

    def gradients(self, points: np.ndarray) -> np.ndarray:
        """d e_{l,i} / d x_j at ``points``; returns (M, 3 [i], 3 [j], ...)."""
        phase = np.tensordot(self.wavevectors.astype(float), points, axes=([1], [-1]))
        shape = (self.size,) + (1,) * (phase.ndim - 1)
        dscalar = np.where(self.parities.reshape(shape) == COS, -np.sin(phase), np.cos(phase))
        k = self.wavevectors.astype(float)
        p = self.directions
        extra = (1,) * (phase.ndim - 1)
        return (NORMALIZATION
                * p.reshape(self.size, 3, 1, *extra)
                * k.reshape(self.size, 1, 3, *extra)
                * dscalar[:, None, None])

    def synthesize(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Velocity field (3, ...) represented by ``coeffs`` at ``points``."""
        return np.tensordot(coeffs, self.fields(points), axes=([0], [0]))

    # -- quadrature operators for the nonlinearity ----------------------

    @property
    def quadrature_points(self) -> int:
        return 3 * self.cutoff + 1

    @cached_property
    def _operators(self) -> dict:
        n = self.quadrature_points
        x = TWO_PI * np.arange(n) / n
        pts = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
        weight = (TWO_PI / n) ** 3
        G = len(pts)
        fields = self.fields(pts)            # (M, 3, G)
        grads = self.gradients(pts)          # (M, 3, 3, G)
        synth = fields.reshape(self.size, 3 * G)
        grad_synth = grads.reshape(self.size, 9 * G)
        analysis = weight * synth.T          # (3G, M)
        # <e_l, div(u u^T)> = -sum_ij <d_j e_{l,i}, u_i u_j>
        div_rows = []
        for i, j in _SYM_PAIRS:
            g = grads[:, i, j] if i == j else grads[:, i, j] + grads[:, j, i]
            div_rows.append(-weight * g.T)   # (G, M)
        div_analysis = np.concatenate(div_rows, axis=0)
        return {"G": G, "synth": np.ascontiguousarray(synth),
                "grad_synth": np.ascontiguousarray(grad_synth),
                "analysis": np.ascontiguousarray(analysis),
                "div_analysis": np.ascontiguousarray(div_analysis)}


def build_basis(cutoff: int) -> SpectralBasis:
    """All divergence-free real modes with 0 < |k|_inf <= cutoff, sorted by
    eigenvalue, then (k, parity, polarization) lexicographically."""
    rows = []
    for k in canonical_wavevectors(cutoff):
        p1, p2 = polarization_pair(k)
        lam = float(sum(c * c for c in k))
        for parity in (COS, SIN):
            for pol, p in ((1, p1), (2, p2)):
                rows.append((lam, k, parity, pol, p))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    return SpectralBasis(
        cutoff=cutoff,
        wavevectors=np.array([r[1] for r in rows], dtype=np.int64),
        parities=np.array([r[2] for r in rows], dtype=np.int64),
        polarizations=np.array([r[3] for r in rows], dtype=np.int64),
        directions=np.array([r[4] for r in rows], dtype=float),
        eigenvalues=np.array([r[0] for r in rows], dtype=float),
    )


def stokes_apply(basis: SpectralBasis, state: np.ndarray) -> np.ndarray:
    return np.asarray(state) * basis.eigenvalues


def bilinear_B(basis: SpectralBasis, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """pi_N Leray(u . grad v) for states of shape (M,) or batches (b, M)."""
    ops = basis._operators
    G = ops["G"]
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    single = u.ndim == 1
    U = np.atleast_2d(u)
    V = np.atleast_2d(v)
    uphys = (U @ ops["synth"]).reshape(-1, 3, G)
    grad = (V @ ops["grad_synth"]).reshape(-1, 3, 3, G)
    conv = np.einsum("bjg,bijg->big", uphys, grad).reshape(-1, 3 * G)
    out = conv @ ops["analysis"]
    return out[0] if single else out


def nonlinear_term(basis: SpectralBasis, u: np.ndarray) -> np.ndarray:
    """B(u, u) in divergence form; same result as ``bilinear_B(u, u)`` for
    divergence-free u, at roughly a third of the cost."""
    ops = basis._operators
    G = ops["G"]
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    U = np.atleast_2d(u)
    phys = (U @ ops["synth"]).reshape(-1, 3, G)
    prod = np.empty((U.shape[0], 6, G))
    for n, (i, j) in enumerate(_SYM_PAIRS):
        np.multiply(phys[:, i], phys[:, j], out=prod[:, n])
    out = prod.reshape(U.shape[0], 6 * G) @ ops["div_analysis"]
    return out[0] if single else out


def trilinear(basis: SpectralBasis, u1, u2, u3) -> float:
    """<u1, B(u2, u3)>_H."""
    return float(np.dot(u1, bilinear_B(basis, u2, u3)))
