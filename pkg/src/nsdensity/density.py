"""Histogram densities on F and the distances used to measure their time regularity.

Grid functions live on a uniform box ``center +/- half_width`` with ``bins``
cells per axis and are zero outside it.  Differences ``Delta_h^n`` use shifts
that are whole numbers of cells, so every operation here is an exact finite
sum over the grid.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, special, stats

MAX_OUTSIDE = 0.01


class GridMismatchError(ValueError):
    pass


class FitRefusedError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Grid:
    center: tuple[float, ...]
    half_width: float
    bins: int

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def width(self) -> float:
        return 2.0 * self.half_width / self.bins

    @property
    def cell_volume(self) -> float:
        return self.width ** self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.bins,) * self.d

    def edges(self, axis: int) -> np.ndarray:
        c = self.center[axis]
        return np.linspace(c - self.half_width, c + self.half_width, self.bins + 1)

    def centers(self, axis: int) -> np.ndarray:
        e = self.edges(axis)
        return 0.5 * (e[1:] + e[:-1])

    def mesh(self) -> np.ndarray:
        """Cell centers, shape (*shape, d)."""
        axes = [self.centers(a) for a in range(self.d)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def same_as(self, other: "Grid") -> bool:
        return (self.bins == other.bins and self.d == other.d
                and math.isclose(self.half_width, other.half_width, rel_tol=1e-12)
                and np.allclose(self.center, other.center, rtol=0, atol=1e-12 * self.half_width))


@dataclass(eq=False)
class DensityEstimate:
    grid: Grid
    values: np.ndarray
    sample_count: int = 0
    outside_fraction: float = 0.0

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def to_csv(self, path) -> None:
        mesh = self.grid.mesh().reshape(-1, self.d)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{a}" for a in range(self.d)] + ["value"])
            for x, v in zip(mesh, self.values.reshape(-1)):
                w.writerow([repr(float(c)) for c in x] + [repr(float(v))])


def box_for(samples: np.ndarray, n_sd: float = 6.0) -> tuple[tuple[float, ...], float]:
    """Center and half-width spanning ``n_sd`` empirical standard deviations."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float).T).T
    center = tuple(float(c) for c in samples.mean(axis=0))
    sd = float(samples.std(axis=0).max())
    return center, n_sd * (sd if sd > 0 else 1.0)


def scott_bins(n_samples: int, d: int, half_width: float, sd: float,
               lo: int = 8, hi: int = 1024) -> int:
    """Cells per axis from the normal-reference rule h = 3.5 sd n^(-1/(d+2))."""
    h = 3.5 * sd * n_samples ** (-1.0 / (d + 2))
    return int(np.clip(round(2.0 * half_width / h), lo, hi))


def estimate_density(samples: np.ndarray, half_width: float, bins: int,
                     center=None, min_samples: int = 1000) -> DensityEstimate:
    """Normalized histogram of samples (n,) or (n, d) on the box."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if d not in (1, 2):
        raise ValueError("densities are estimated on F of dimension 1 or 2")
    if n < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {n}")
    center = (0.0,) * d if center is None else tuple(float(c) for c in np.atleast_1d(center))
    grid = Grid(center=center, half_width=float(half_width), bins=int(bins))
    # integer cell indices; the last edge is closed like numpy.histogram
    rel = (x - np.asarray(center)) / grid.width + bins / 2.0
    idx = np.floor(rel).astype(np.int64)
    idx[(rel == bins)] = bins - 1
    inside = np.all((idx >= 0) & (idx < bins), axis=1)
    outside = 1.0 - inside.mean()
    if outside >= MAX_OUTSIDE:
        raise ValueError(f"{outside:.2%} of samples fall outside the box; enlarge it")
    flat = np.ravel_multi_index(tuple(idx[inside].T), grid.shape)
    counts = np.bincount(flat, minlength=bins ** d).reshape(grid.shape).astype(float)
    values = counts / (counts.sum() * grid.cell_volume)
    return DensityEstimate(grid=grid, values=values, sample_count=n, outside_fraction=float(outside))


def _check_grids(f: DensityEstimate, g: DensityEstimate) -> None:
    if not f.grid.same_as(g.grid):
        raise GridMismatchError("density estimates live on different grids")


def l1_distance(f: DensityEstimate, g: DensityEstimate) -> float:
    _check_grids(f, g)
    return float(np.abs(f.values - g.values).sum() * f.grid.cell_volume)


def _shifted(values: np.ndarray, shift) -> np.ndarray:
    """x -> values[x + shift] with zero extension."""
    out = np.zeros_like(values)
    src, dst = [], []
    for s, n in zip(shift, values.shape):
        s = int(s)
        if abs(s) >= n:
            return out
        if s >= 0:
            src.append(slice(s, n)); dst.append(slice(0, n - s))
        else:
            src.append(slice(0, n + s)); dst.append(slice(-s, n))
    out[tuple(dst)] = values[tuple(src)]
    return out


def finite_difference(values: np.ndarray, shift, n: int) -> np.ndarray:
    """Delta_h^n f = sum_j (-1)^(n-j) C(n, j) f(x + j h) for h = ``shift`` cells."""
    if n < 1:
        raise ValueError("difference order must be >= 1")
    shift = tuple(np.atleast_1d(shift))
    if len(shift) != values.ndim:
        raise ValueError("shift must have one entry per axis")
    if any(float(s) != int(s) for s in shift):
        raise ValueError("shift must be a whole number of cells")
    shift = tuple(int(s) for s in shift)
    out = np.zeros_like(values, dtype=float)
    for j in range(n + 1):
        out += (-1) ** (n - j) * special.comb(n, j, exact=True) * _shifted(values, tuple(j * s for s in shift))
    return out


def default_shifts(grid: Grid, per_axis: int = 12) -> list[tuple[int, ...]]:
    """Log-spaced whole-cell shifts with |h| from one cell to 1: the axis
    directions, and for d = 2 also both diagonals."""
    w = grid.width
    max_cells = max(1, int(math.floor(1.0 / w + 1e-9)))
    mags = np.unique(np.round(np.geomspace(1, max_cells, per_axis)).astype(int))
    if len(mags) < per_axis:
        mags = np.arange(1, max_cells + 1)
    shifts = []
    if grid.d == 1:
        return [(int(m),) for m in mags]
    for m in mags:
        shifts += [(int(m), 0), (0, int(m))]
    dmax = max(1, int(math.floor(1.0 / (w * math.sqrt(2)) + 1e-9)))
    dmags = np.unique(np.round(np.geomspace(1, dmax, per_axis)).astype(int))
    for m in dmags:
        if m * w * math.sqrt(2) <= 1.0 + 1e-12:
            shifts += [(int(m), int(m)), (int(m), -int(m))]
    return shifts


def besov_seminorm(values: np.ndarray, grid: Grid, alpha: float, n: int = 1,
                   shifts=None) -> float:
    """max over the shift set of |Delta_h^n f|_L1 / |h|^alpha (p = 1, q = inf)."""
    if not 0 < alpha < n:
        raise ValueError("need 0 < alpha < n")
    shifts = default_shifts(grid) if shifts is None else shifts
    vol = grid.cell_volume
    best = 0.0
    for s in shifts:
        h = grid.width * math.sqrt(sum(c * c for c in s))
        if h == 0 or h > 1.0 + 1e-12:
            continue
        val = float(np.abs(finite_difference(values, s, n)).sum() * vol) / h ** alpha
        best = max(best, val)
    return best


def besov_distance(f: DensityEstimate, g: DensityEstimate, alpha: float, n: int = 1,
                   shifts=None) -> float:
    """|f - g|_L1 + [f - g]_{B^alpha_{1,inf}}."""
    _check_grids(f, g)
    diff = f.values - g.values
    return (float(np.abs(diff).sum() * f.grid.cell_volume)
            + besov_seminorm(diff, f.grid, alpha, n, shifts))


def besov_norm(f: DensityEstimate, alpha: float, n: int = 1, shifts=None) -> float:
    return f.mass + besov_seminorm(f.values, f.grid, alpha, n, shifts)


def bump_kernel(radius_cells: float, d: int) -> np.ndarray:
    """exp(-1 / (1 - r^2)) sampled on cell offsets with |offset| < radius, unit sum."""
    R = int(math.ceil(radius_cells))
    ax = np.arange(-R, R + 1, dtype=float)
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    r2 = sum(m * m for m in mesh) / radius_cells ** 2
    k = np.where(r2 < 1.0, np.exp(-1.0 / np.where(r2 < 1.0, 1.0 - r2, 1.0)), 0.0)
    return k / k.sum()


def mollify(f: DensityEstimate, eps: float) -> DensityEstimate:
    """Convolve with a compactly supported bump of radius ``eps``; unit mass kept."""
    if eps < f.grid.width * (1 - 1e-12):
        raise ValueError("mollification radius must be at least one cell")
    k = bump_kernel(eps / f.grid.width, f.d)
    vals = ndimage.convolve(f.values, k, mode="constant", cval=0.0)
    mass = vals.sum() * f.grid.cell_volume
    if mass > 0:
        vals = vals * (f.mass / mass)
    return DensityEstimate(grid=f.grid, values=vals, sample_count=f.sample_count,
                           outside_fraction=f.outside_fraction)


@dataclass(frozen=True)
class IBPCheck:
    lhs: float
    rhs: float
    gap: float
    scale: float

    @property
    def ok(self) -> bool:
        return self.gap <= 1e-10 * max(self.scale, 1e-300)


def discrete_ibp_check(f: np.ndarray, phi: np.ndarray, shift, n: int, cell_volume: float = 1.0) -> IBPCheck:
    """int Delta_h^n phi . f against int Delta_{-h}^n f . phi."""
    shift = tuple(np.atleast_1d(shift))
    neg = tuple(-int(s) for s in shift)
    lhs = float(np.sum(finite_difference(phi, shift, n) * f) * cell_volume)
    rhs = float(np.sum(finite_difference(f, neg, n) * phi) * cell_volume)
    scale = float(np.abs(f).sum() * cell_volume * np.abs(phi).max(initial=0.0))
    return IBPCheck(lhs=lhs, rhs=rhs, gap=abs(lhs - rhs), scale=scale)


@dataclass
class HoelderFit:
    gaps: np.ndarray
    distances: np.ndarray
    used: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    noise_floor: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["gap", "distance", "used_flag"])
            for g, dist, u in zip(self.gaps, self.distances, self.used):
                w.writerow([repr(float(g)), repr(float(dist)), int(bool(u))])


def hoelder_fit(gaps, distances, noise_floor: float = 0.0, min_pairs: int = 4) -> HoelderFit:
    """Least squares on (log gap, log distance), dropping distances at or below the floor."""
    gaps = np.asarray(gaps, dtype=float)
    distances = np.asarray(distances, dtype=float)
    if gaps.shape != distances.shape:
        raise ValueError("gaps and distances differ in length")
    used = (gaps > 0) & (distances > noise_floor) & (distances > 0)
    if used.sum() < min_pairs:
        raise FitRefusedError(f"only {int(used.sum())} pairs above the noise floor {noise_floor:.3g}")
    lx, ly = np.log(gaps[used]), np.log(distances[used])
    res = stats.linregress(lx, ly)
    r2 = float(res.rvalue ** 2) if np.ptp(ly) > 0 else 1.0
    if not np.isfinite(r2):
        r2 = 1.0
    return HoelderFit(gaps=gaps, distances=distances, used=used, slope=float(res.slope),
                      intercept=float(res.intercept), r_squared=r2,
                      slope_stderr=float(res.stderr), noise_floor=float(noise_floor))


def project_ensemble(states: np.ndarray, steps: np.ndarray, F_positions, t: float, dt: float) -> np.ndarray:
    """F-coordinates at time ``t`` from recorded states (n, len(steps), k).

    ``F_positions`` index the recorded coordinates; ``t`` must be a recorded
    grid time (no interpolation).
    """
    k = t / dt
    if abs(k - round(k)) > 1e-9:
        raise ValueError(f"t={t} is not on the time grid")
    hit = np.flatnonzero(np.asarray(steps) == int(round(k)))
    if len(hit) != 1:
        raise ValueError(f"t={t} was not recorded")
    return np.asarray(states)[:, hit[0]][:, list(F_positions)]
