"""Holder-in-time experiments for the F-marginal densities, plus diagnostics.

Both holder experiments read one ensemble of ``full_u`` paths recorded at
``s`` and every ``s + gap``.  Densities at all times share one histogram
grid.  Distances are compared against a noise floor measured from two
disjoint halves of the ensemble at equal times, and pairs at or below it are
left out of the fit.

Histogram noise inflates a distance roughly in quadrature, d_n^2 ~ d^2 + c / n.
With ``floor_correction`` each pair is also measured on the two halves and
extrapolated, d^2 ~ 2 d_n^2 - d_{n/2}^2.  Unlike subtracting the same-time
floor, this sees that paths shared by s and t cancel most of the noise at
small gaps.
"""
from __future__ import annotations

import csv
import hashlib
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analytic, girsanov
from .basis import bilinear_B, build_basis, leray_project, nonlinear_term, trilinear
from .config import ExperimentConfig
from .density import (DensityEstimate, FitRefusedError, Grid, HoelderFit, besov_norm, besov_seminorm,
                      default_shifts, discrete_ibp_check, estimate_density, hoelder_fit,
                      l1_distance, mollify, scott_bins)
from .ensemble import Ensemble, run_ensemble
from .integrator import Model, SystemVariant, energy_moment_check
from .noise import (CovarianceSpec, SubspaceF, check_assumptions, projected_covariance,
                    pseudo_inverse_apply)
from .seeding import path_generator

MAX_BLOWN = 0.01
L1, BESOV = "l1", "besov"

# path-index offsets keep the ensembles of one run statistically independent
_OFFSET_HOLDER = 0
_OFFSET_TIMEDEP = 1 << 40
_OFFSET_DIAG = 2 << 40
_OFFSET_DIAG_FULL = 3 << 40
_STREAM_MISC = (1 << 62) + 7


class BlowUpAbort(RuntimeError):
    pass


# -- setup ----------------------------------------------------------------

def build_model(cfg: ExperimentConfig) -> tuple[Model, np.ndarray]:
    basis = build_basis(cfg.cutoff)
    cov = CovarianceSpec.from_basis(basis, gamma=cfg.gamma, sigma0=cfg.sigma0)
    model = Model(basis=basis, cov=cov, F=SubspaceF(cfg.F), nu=cfg.nu, nonlinear=cfg.nonlinear)
    return model, cfg.x0_vector(basis.size)


_SIM_KEYS = ("cutoff", "nu", "gamma", "sigma0", "nonlinear", "F", "x0", "dt", "master_seed", "chunk_size")


def _cache_key(cfg: ExperimentConfig, purpose: str, **extra) -> str:
    items = [(k, getattr(cfg, k)) for k in _SIM_KEYS] + sorted(extra.items())
    text = purpose + "|" + "|".join(f"{k}={v!r}" for k, v in items)
    return hashlib.sha256(text.encode()).hexdigest()[:20]


def _cached_ensemble(cfg: ExperimentConfig, purpose: str, extra: dict, make) -> Ensemble:
    if not cfg.cache_dir:
        return make()
    path = Path(cfg.cache_dir) / f"{purpose}-{_cache_key(cfg, purpose, **extra)}.npz"
    if path.exists():
        return Ensemble.load(path)
    ens = make()
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.stem + f".tmp{os.getpid()}.npz")
    ens.save(tmp)
    os.replace(tmp, path)
    return ens


def _check_blowups(ens: Ensemble) -> None:
    if ens.blown_fraction > MAX_BLOWN:
        raise BlowUpAbort(f"{ens.blown_fraction:.2%} of paths hit the blow-up guard")


def holder_ensemble(cfg: ExperimentConfig) -> Ensemble:
    """Full-system paths recorded on F at s and every s + gap."""
    model, x0 = build_model(cfg)
    pairs = cfg.time_pairs()
    times = sorted({pairs[0][0]} | {t for _, t in pairs})
    T = times[-1]

    def make():
        return run_ensemble(model, x0, SystemVariant.full(), T, cfg.dt, cfg.ensemble_size,
                            cfg.master_seed, times, record_indices=cfg.F,
                            workers=cfg.worker_count, chunk_size=cfg.chunk_size,
                            first_path=_OFFSET_HOLDER)

    ens = _cached_ensemble(cfg, "holder", {"n": cfg.ensemble_size, "times": tuple(times)}, make)
    _check_blowups(ens)
    return ens


# -- distance tables -------------------------------------------------------

def common_grid(cfg: ExperimentConfig, samples: list[np.ndarray]) -> Grid:
    """One box for every time: pooled mean, ``box_sd`` times the largest
    per-time standard deviation; bins from the normal-reference rule on the
    smallest one unless fixed in the config."""
    pooled = np.concatenate(samples)
    center = tuple(float(c) for c in pooled.mean(axis=0))
    sds = np.array([x.std(axis=0) for x in samples])
    half = cfg.box_sd * float(sds.max())
    bins = cfg.bins or scott_bins(len(samples[0]), cfg.d, half, float(sds.min()))
    return Grid(center=center, half_width=half, bins=bins)


def _density(x: np.ndarray, grid: Grid) -> DensityEstimate:
    return estimate_density(x, grid.half_width, grid.bins, center=grid.center, min_samples=1)


@dataclass(frozen=True)
class Metric:
    """Distance between two histograms on a common grid."""

    kind: str
    alpha: float = 0.2
    n_diff: int = 1
    mollify_cells: float = 2.0
    shifts: tuple = ()

    def __call__(self, f: DensityEstimate, g: DensityEstimate) -> float:
        d1 = l1_distance(f, g)
        if self.kind == L1:
            return d1
        return d1 + self.seminorm(f, g)

    def seminorm(self, f: DensityEstimate, g: DensityEstimate) -> float:
        """Seminorm of the mollified difference; the L1 part stays unsmoothed,
        so the Besov distance always dominates the L1 distance."""
        eps = self.mollify_cells * f.grid.width
        diff = mollify(f, eps).values - mollify(g, eps).values
        return besov_seminorm(diff, f.grid, self.alpha, self.n_diff, list(self.shifts) or None)

    def parts(self, f: DensityEstimate, g: DensityEstimate) -> tuple[float, float]:
        d1 = l1_distance(f, g)
        return d1, (0.0 if self.kind == L1 else self.seminorm(f, g))


def make_metric(cfg: ExperimentConfig, kind: str, grid: Grid) -> Metric:
    if kind not in (L1, BESOV):
        raise ValueError(f"unknown metric {kind!r}")
    return Metric(kind=kind, alpha=cfg.alpha, n_diff=cfg.n_diff, mollify_cells=cfg.mollify_cells,
                  shifts=tuple(default_shifts(grid)))


def halving_extrapolation(full: np.ndarray, half_sq: np.ndarray) -> np.ndarray:
    """sqrt(max(2 d_n^2 - mean(d_{n/2}^2), 0)) elementwise."""
    full = np.asarray(full, dtype=float)
    return np.sqrt(np.maximum(2.0 * full * full - np.asarray(half_sq, dtype=float), 0.0))


@dataclass
class DistanceTable:
    kind: str
    pairs: list
    grid: Grid
    raw: np.ndarray           # (pairs, 2): L1 part, seminorm part
    half_sq: np.ndarray       # (pairs, 2): mean square of the parts on the two halves
    stderr: np.ndarray        # (pairs,)
    floor_parts: np.ndarray   # (2,)
    corrected: bool

    @property
    def gaps(self) -> np.ndarray:
        return np.array([round(t - s, 12) for s, t in self.pairs])

    @property
    def raw_distance(self) -> np.ndarray:
        return self.raw.sum(axis=1)

    @property
    def noise_floor(self) -> float:
        return float(self.floor_parts.sum())

    @property
    def distance(self) -> np.ndarray:
        """Reported distance; with correction each part is extrapolated
        separately, so the Besov value still dominates the L1 value."""
        if not self.corrected:
            return self.raw_distance
        return halving_extrapolation(self.raw, self.half_sq).sum(axis=1)

    @property
    def used(self) -> np.ndarray:
        return (self.raw_distance > self.noise_floor) & (self.distance > 0)


def _groups(n: int, k: int) -> list[np.ndarray]:
    return np.array_split(np.arange(n), k)


def distance_table(cfg: ExperimentConfig, ens: Ensemble, kind: str,
                   grid: Grid | None = None) -> DistanceTable:
    pairs = cfg.time_pairs()
    times = sorted({p[0] for p in pairs} | {p[1] for p in pairs})
    X = {t: ens.coords(t, cfg.F) for t in times}
    n = len(X[times[0]])
    grid = grid or common_grid(cfg, list(X.values()))
    metric = make_metric(cfg, kind, grid)
    dens = {t: _density(x, grid) for t, x in X.items()}

    raw = np.array([metric.parts(dens[s], dens[t]) for s, t in pairs])

    # delete-one-group jackknife
    groups = _groups(n, cfg.jackknife_groups)
    k = len(groups)
    reps = np.empty((k, len(pairs)))
    for g, idx in enumerate(groups):
        keep = np.ones(n, dtype=bool)
        keep[idx] = False
        dk = {t: _density(x[keep], grid) for t, x in X.items()}
        reps[g] = [metric(dk[s], dk[t]) for s, t in pairs]
    stderr = np.sqrt((k - 1) / k * ((reps - reps.mean(axis=0)) ** 2).sum(axis=0))

    # two disjoint halves; at equal times they give the floor (halves carry
    # twice the variance), across a pair they feed the extrapolation
    half = n // 2
    A = {t: _density(x[:half], grid) for t, x in X.items()}
    B = {t: _density(x[half:2 * half], grid) for t, x in X.items()}
    floor_parts = np.mean([metric.parts(A[t], B[t]) for t in times], axis=0) / math.sqrt(2.0)
    half_sq = np.array([0.5 * (np.square(metric.parts(A[s], A[t])) + np.square(metric.parts(B[s], B[t])))
                        for s, t in pairs])

    return DistanceTable(kind=kind, pairs=pairs, grid=grid, raw=raw, half_sq=half_sq, stderr=stderr,
                         floor_parts=floor_parts, corrected=cfg.floor_correction)


# -- outputs ---------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


@dataclass
class HolderResult:
    table: DistanceTable
    fit: HoelderFit | None
    refused: str = ""

    @property
    def slope(self) -> float:
        return self.fit.slope if self.fit else float("nan")


def fit_table(table: DistanceTable) -> HolderResult:
    dist = table.distance
    # zero out excluded pairs so the fit's own floor test drops them
    masked = np.where(table.used, dist, 0.0)
    try:
        fit = hoelder_fit(table.gaps, masked, noise_floor=0.0)
    except FitRefusedError:
        msg = (f"only {int(table.used.sum())} of {len(table.pairs)} pairs above the "
               f"noise floor {table.noise_floor:.4g}")
        return HolderResult(table=table, fit=None, refused=msg)
    fit.noise_floor = table.noise_floor
    fit.distances = dist
    return HolderResult(table=table, fit=fit)


def write_holder_outputs(result: HolderResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = result.table
    rows = [(s, tt, g, d, e, u) for (s, tt), g, d, e, u
            in zip(t.pairs, t.gaps, t.distance, t.stderr, t.used)]
    write_csv(out / "distances.csv", ["s", "t", "gap", "distance", "stderr", "used"], rows)
    f = result.fit
    nan = float("nan")
    write_csv(out / "fit.csv", ["slope", "intercept", "r2", "noise_floor"],
              [(f.slope if f else nan, f.intercept if f else nan,
                f.r_squared if f else nan, t.noise_floor)])
    if f:
        f.to_csv(out / "fit_pairs.csv")


def _run_holder(cfg: ExperimentConfig, kind: str, out_dir=None, ensemble: Ensemble | None = None) -> HolderResult:
    ens = ensemble if ensemble is not None else holder_ensemble(cfg)
    _check_blowups(ens)
    result = fit_table(distance_table(cfg, ens, kind))
    if out_dir is not None:
        write_holder_outputs(result, out_dir)
    return result


def run_l1_holder(cfg: ExperimentConfig, out_dir=None, ensemble: Ensemble | None = None) -> HolderResult:
    return _run_holder(cfg, L1, out_dir, ensemble)


def run_besov_holder(cfg: ExperimentConfig, out_dir=None, ensemble: Ensemble | None = None) -> HolderResult:
    cfg.validate_besov()
    return _run_holder(cfg, BESOV, out_dir, ensemble)


# -- closed-form references for the linear system -------------------------

def ou_marginal(cfg: ExperimentConfig, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact mean and variance of pi_F u(t) for the discrete linear scheme."""
    model, x0 = build_model(cfg)
    Fi = model.F.index_array
    k = int(round(t / cfg.dt))
    q = model.decay(cfg.dt)[Fi]
    var = analytic.ou_discrete_variance(model.cov.sigmas[Fi], model.basis.eigenvalues[Fi],
                                        cfg.nu, cfg.dt, k)
    return x0[Fi] * q ** k, var


def ou_reference_table(cfg: ExperimentConfig, table: DistanceTable) -> np.ndarray:
    """Distances between the exact cell-averaged Gaussians on the table's grid."""
    metric_kind = table.kind
    grid = table.grid
    shifts = default_shifts(grid)
    out = []
    for s, t in table.pairs:
        fs = analytic.gaussian_on_grid(grid, *ou_marginal(cfg, s))
        ft = analytic.gaussian_on_grid(grid, *ou_marginal(cfg, t))
        d = l1_distance(fs, ft)
        if metric_kind == BESOV:
            d += besov_seminorm(fs.values - ft.values, grid, cfg.alpha, cfg.n_diff, shifts)
        out.append(d)
    return np.array(out)


# -- growth of the Besov norm as t -> 0 ------------------------------------

@dataclass
class TimeDepResult:
    times: np.ndarray
    norms: np.ndarray
    fit: HoelderFit


def run_timedep(cfg: ExperimentConfig, out_dir=None) -> TimeDepResult:
    """||f(t)||_{B^alpha_{1,inf}} on a log grid of t; slope of the log-log fit
    over ``t <= timedep_fit_max``."""
    model, x0 = build_model(cfg)
    times = cfg.timedep_grid()

    def make():
        return run_ensemble(model, x0, SystemVariant.full(), float(times[-1]), cfg.dt,
                            cfg.timedep_paths, cfg.master_seed, times, record_indices=cfg.F,
                            workers=cfg.worker_count, chunk_size=cfg.chunk_size,
                            first_path=_OFFSET_TIMEDEP)

    ens = _cached_ensemble(cfg, "timedep", {"n": cfg.timedep_paths, "times": tuple(times)}, make)
    _check_blowups(ens)
    norms = []
    for t in times:
        x = ens.coords(float(t), cfg.F)
        grid = common_grid(cfg, [x])
        f = mollify(_density(x, grid), cfg.mollify_cells * grid.width)
        norms.append(besov_norm(f, cfg.timedep_alpha, cfg.n_diff))
    norms = np.array(norms)
    sel = times <= cfg.timedep_fit_max + 1e-12
    fit = hoelder_fit(times[sel], norms[sel])
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "timedep.csv", ["t", "besov_norm", "used"], zip(times, norms, sel))
        write_csv(out / "timedep_fit.csv", ["slope", "intercept", "r2"],
                  [(fit.slope, fit.intercept, fit.r_squared)])
    return TimeDepResult(times=times, norms=norms, fit=fit)


# -- diagnostics -----------------------------------------------------------

@dataclass
class DiagRow:
    prop: str
    measured: float
    tolerance: object
    passed: bool


def _rel(a, b) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def _structural_rows(cfg: ExperimentConfig, model: Model, rng: np.random.Generator) -> list[DiagRow]:
    basis = model.basis
    rows = []
    M = basis.size

    n = basis.quadrature_points
    x = 2 * np.pi * np.arange(n) / n
    pts = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    E = basis.fields(pts).reshape(M, -1)
    gram = E @ E.T * (2 * np.pi / n) ** 3
    err = float(np.abs(gram - np.eye(M)).max())
    rows.append(DiagRow("basis_orthonormality", err, 1e-12, err <= 1e-12))

    U, V, W = (rng.standard_normal((20, M)) for _ in range(3))
    anti = max(abs(trilinear(basis, u, v, w) + trilinear(basis, w, v, u))
               / (np.linalg.norm(u) * np.linalg.norm(v) * np.linalg.norm(w))
               for u, v, w in zip(U, V, W))
    rows.append(DiagRow("trilinear_antisymmetry", anti, 1e-10, anti <= 1e-10))
    nl = nonlinear_term(basis, U)
    energy = float(np.max(np.abs(np.sum(U * nl, axis=1))
                          / np.linalg.norm(U, axis=1) ** 3))
    rows.append(DiagRow("energy_identity", energy, 1e-10, energy <= 1e-10))
    agree = _rel(nl, bilinear_B(basis, U, U))
    rows.append(DiagRow("divergence_form_agreement", agree, 1e-10, agree <= 1e-10))

    leray = 0.0
    for _ in range(20):
        k = rng.integers(-3, 4, 3)
        if not k.any():
            continue
        v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        p = leray_project(k, v)
        leray = max(leray, float(np.abs(leray_project(k, p) - p).max()), float(abs(k @ p)))
    rows.append(DiagRow("leray_idempotence", leray, 1e-12, leray <= 1e-12))

    F = model.F
    f = rng.standard_normal((10, F.d))
    x_min = pseudo_inverse_apply(model.cov, F, f)
    back = F.project(model.cov.sigmas * x_min)
    pinv = _rel(back, f)
    rows.append(DiagRow("pseudo_inverse_identity", pinv, 1e-12, pinv <= 1e-12))

    rep = check_assumptions(model.cov, F)
    smin = float(np.abs(model.cov.sigmas[F.index_array]).min())
    rows.append(DiagRow("noise_reaches_F", smin, 1e-14, rep.hpgirsanov2))
    pc = projected_covariance(model.cov, F)
    rows.append(DiagRow("projected_covariance_min_eigenvalue", pc.min_eigenvalue, 0.0, rep.hpbesov))

    fgrid = rng.random((32, 32))
    phi = rng.standard_normal((32, 32))
    ibp = discrete_ibp_check(fgrid, phi, (3, -2), 2)
    rel_ibp = ibp.gap / ibp.scale
    rows.append(DiagRow("discrete_integration_by_parts", rel_ibp, 1e-10, ibp.ok))
    return rows


_TEST_FUNCTIONS = (
    ("cos", lambda y: np.cos(y.sum(axis=1))),
    ("sin", lambda y: np.sin(y[:, 0] - 0.5 * y[:, -1])),
    ("tanh", lambda y: np.tanh(y[:, 0])),
    ("gauss", lambda y: np.exp(-0.5 * (y ** 2).sum(axis=1))),
    ("cauchy", lambda y: 1.0 / (1.0 + (y ** 2).sum(axis=1))),
)


def _girsanov_rows(cfg: ExperimentConfig, model: Model, x0: np.ndarray) -> list[DiagRow]:
    T = cfg.diag_T
    dt = cfg.dt
    s = round(0.5 * T, 12) if cfg.on_grid(0.5 * T) else dt
    gap = T - s
    q = round(s + max(dt, round(gap / 4 / dt) * dt), 12)
    times = sorted({s, q, T})
    n_big = 1e6
    common = dict(record_indices=model.F.index_array, workers=cfg.worker_count,
                  chunk_size=cfg.chunk_size)
    trunc = run_ensemble(model, x0, SystemVariant.truncated(n_big), T, dt, cfg.diag_paths,
                         cfg.master_seed, times, first_path=_OFFSET_DIAG, **common)
    red = run_ensemble(model, x0, SystemVariant.reduced(), T, dt, cfg.diag_paths,
                       cfg.master_seed, times, weight_threshold=math.inf,
                       first_path=_OFFSET_DIAG, **common)
    full = run_ensemble(model, x0, SystemVariant.full(), T, dt, cfg.diag_paths,
                        cfg.master_seed, times, first_path=_OFFSET_DIAG_FULL, **common)
    rows = []

    mart = girsanov.martingale_diagnostic(trunc.log_weight(T))
    dev = abs(mart.mean - 1.0)
    rows.append(DiagRow("weight_mean_is_one", dev, 3 * mart.stderr, dev <= 3 * mart.stderr))

    lg_s = trunc.log_weight(s)
    far = girsanov.log_moment_diagnostic(lg_s, trunc.log_weight(T), s, T, float(np.linalg.norm(x0)))
    near = girsanov.log_moment_diagnostic(lg_s, trunc.log_weight(q), s, q, float(np.linalg.norm(x0)))
    if far.lhs == 0.0 and near.lhs == 0.0:
        ratio, ok = 0.0, True
    else:
        ratio = near.lhs / far.lhs if far.lhs > 0 else float("inf")
        ok = 0.35 <= ratio <= 0.65
    rows.append(DiagRow("log_moment_gap_quarter_ratio", ratio, "[0.35, 0.65]", ok))

    lg_T = trunc.log_weight(T)
    X = np.sign(np.exp(lg_T) - np.exp(lg_s))
    inc = girsanov.increment_diagnostic(lg_s, lg_T, X)
    tol = 2 * inc.log_moment + 3 * inc.stderr
    rows.append(DiagRow("weight_increment_bound", inc.value, tol, inc.value <= tol))

    probs = girsanov.stopping_probability(red.stopping_integral(T), [0.25, 0.5, 1, 2, 4, 8])
    p = np.array(list(probs.values()))
    rise = float(np.max(np.diff(p), initial=0.0))
    rows.append(DiagRow("stopping_probability_monotone", rise, 0.0, rise <= 0.0))

    cov_F = projected_covariance(model.cov, model.F).matrix
    phi = _TEST_FUNCTIONS[0][1]
    mk = analytic.markov_rep_check(red.log_weight(s), red.coords(s, cfg.F), red.coords(T, cfg.F),
                                   phi, cov_F, T - s)
    rows.append(DiagRow("markov_representation_gap", abs(mk.gap), 3 * mk.stderr, mk.ok()))

    worst = 0.0
    for _, fn in _TEST_FUNCTIONS:
        tc = girsanov.transfer_check(fn, full.coords(T, cfg.F), trunc.coords(T, cfg.F), trunc.log_weight(T))
        worst = max(worst, tc.gap / tc.stderr if tc.stderr > 0 else (0.0 if tc.gap == 0 else math.inf))
    rows.append(DiagRow("girsanov_transfer_max_gap_in_stderr", worst, 3.0, worst <= 3.0))

    em = energy_moment_check(full.sup_norm, 2.0, float(np.linalg.norm(x0)))
    rows.append(DiagRow("energy_moment_half_vs_full", abs(em.half_lhs - em.lhs) / max(em.lhs, 1e-300),
                        0.1, em.bound_ok))

    blown = max(trunc.blown_fraction, red.blown_fraction, full.blown_fraction)
    rows.append(DiagRow("blown_up_fraction", blown, MAX_BLOWN, blown <= MAX_BLOWN))
    return rows


def brownian_ratio(cfg: ExperimentConfig, model: Model, rng: np.random.Generator,
                   samples: int = 100_000) -> float:
    """Ratio of the second-order difference check at |h| and |h| / 2."""
    cov_F = projected_covariance(model.cov, model.F).matrix
    d = model.F.d
    a = np.full(d, 0.1)
    h = np.zeros(d)
    # small enough that the h^2 term dominates the difference
    h[0] = 0.1
    phi = lambda y: np.exp(-0.5 * (y ** 2).sum(axis=1))
    seed = rng.integers(0, 2 ** 63)
    big = analytic.brownian_diff_check(a, 0.3, 0.5, h, 2, phi, cov_F, samples, np.random.default_rng(seed))
    small = analytic.brownian_diff_check(a, 0.3, 0.5, h / 2, 2, phi, cov_F, samples, np.random.default_rng(seed))
    return big.lhs / small.lhs


def run_diagnostics(cfg: ExperimentConfig, out_dir=None) -> list[DiagRow]:
    model, x0 = build_model(cfg)
    rng = path_generator(cfg.master_seed, _STREAM_MISC)
    rows = _structural_rows(cfg, model, rng)
    ratio = brownian_ratio(cfg, model, rng)
    rows.append(DiagRow("brownian_difference_h_halving_ratio", ratio, "[2.8, 5.7]", 2.8 <= ratio <= 5.7))
    rows += _girsanov_rows(cfg, model, x0)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "diagnostics.csv", ["property", "measured", "tolerance", "pass"],
                  [(r.prop, r.measured, r.tolerance, r.passed) for r in rows])
    return rows
