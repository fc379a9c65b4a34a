import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from nsdensity.density import (DensityEstimate, FitRefusedError, Grid, GridMismatchError,
                               besov_distance, besov_norm, besov_seminorm, bump_kernel,
                               default_shifts, discrete_ibp_check, estimate_density,
                               finite_difference, hoelder_fit, l1_distance, mollify,
                               project_ensemble)


def density_on(grid, values):
    return DensityEstimate(grid=grid, values=np.asarray(values, float))


def l1_to_pdf_1d(est, pdf, sub=20):
    """|f_hat - pdf|_L1 with the pdf resolved inside each cell."""
    e = est.grid.edges(0)
    x = e[:-1, None] + (np.arange(sub) + 0.5)[None] / sub * est.grid.width
    return float(np.sum(np.abs(est.values[:, None] - pdf(x))) * est.grid.width / sub)


# -- projection -------------------------------------------------------------

def test_project_ensemble_columns_and_permutation(rng):
    states = rng.standard_normal((5, 3, 4))
    steps = np.array([0, 10, 20])
    col = project_ensemble(states, steps, [0], 0.01, 1e-3)
    assert np.array_equal(col[:, 0], states[:, 1, 0])
    perm = rng.permutation(5)
    assert np.array_equal(project_ensemble(states[perm], steps, [0, 2], 0.02, 1e-3),
                          project_ensemble(states, steps, [0, 2], 0.02, 1e-3)[perm])
    assert project_ensemble(np.zeros((0, 3, 4)), steps, [1], 0.0, 1e-3).shape == (0, 1)
    with pytest.raises(ValueError):
        project_ensemble(states, steps, [0], 0.0105, 1e-3)


# -- histograms ------------------------------------------------------------

def test_histogram_error_against_standard_gaussian(rng):
    est = estimate_density(rng.standard_normal(1_000_000), 6.0, 200)
    assert l1_to_pdf_1d(est, stats.norm.pdf) <= 0.02
    assert est.mass == pytest.approx(1.0, abs=1e-8)


def test_point_mass_fills_one_cell():
    est = estimate_density(np.zeros(1000), 1.0, 10)
    assert np.count_nonzero(est.values) == 1
    assert est.mass == pytest.approx(1.0, abs=1e-12)


def test_uniform_samples_give_flat_histogram(rng):
    est = estimate_density(rng.uniform(-1, 1, 1_000_000), 1.0, 20)
    assert est.values.max() / est.values.min() < 1.05


def test_rejects_too_much_mass_outside(rng):
    with pytest.raises(ValueError):
        estimate_density(rng.standard_normal(10_000), 2.0, 50)
    with pytest.raises(ValueError):
        estimate_density(rng.standard_normal(10), 6.0, 50)


def test_histogram_consistency_in_2d():
    grid_bins = 40
    errs = []
    mean, var = np.zeros(2), np.ones(2)
    g = Grid(center=(0.0, 0.0), half_width=6.0, bins=grid_bins)
    from nsdensity.analytic import gaussian_on_grid
    exact = gaussian_on_grid(g, mean, var)
    for n, seed in ((10_000, 1), (1_000_000, 2)):
        x = np.random.default_rng(seed).standard_normal((n, 2))
        errs.append(l1_distance(estimate_density(x, 6.0, grid_bins), exact))
    assert errs[1] < errs[0]


# -- L1 ----------------------------------------------------------------------

def test_l1_examples(rng):
    g = Grid(center=(0.0,), half_width=1.0, bins=4)
    f = density_on(g, [2, 0, 0, 0])
    h = density_on(g, [0, 0, 0, 2])
    assert l1_distance(f, f) == 0
    assert l1_distance(f, h) == pytest.approx(2.0)
    with pytest.raises(GridMismatchError):
        l1_distance(f, density_on(Grid((0.0,), 1.0, 8), np.ones(8)))


def test_l1_of_shifted_gaussians(rng):
    x = rng.standard_normal(1_000_000)
    y = rng.standard_normal(1_000_000) + 0.1
    d = l1_distance(estimate_density(x, 6.0, 120), estimate_density(y, 6.0, 120))
    assert d == pytest.approx(2 * (2 * stats.norm.cdf(0.05) - 1), abs=0.01)


# -- finite differences -------------------------------------------------------

def test_difference_of_ramp():
    f = np.arange(20.0) * 0.5
    d = finite_difference(f, (3,), 1)
    assert np.allclose(d[:17], 1.5)


def test_second_difference_stencil():
    f = np.zeros(9)
    f[4] = 1.0
    d = finite_difference(f, (1,), 2)
    assert np.array_equal(d[2:5], [1.0, -2.0, 1.0])


def test_difference_of_indicator():
    g = Grid(center=(0.5,), half_width=2.0, bins=400)
    x = g.centers(0)
    f = ((x >= 0) & (x < 1)).astype(float)
    h = 25
    d = finite_difference(f, (h,), 1)
    hw = h * g.width
    assert np.all(d[(x >= -hw) & (x < 0)] == 1)
    assert np.all(d[(x >= 1 - hw) & (x < 1)] == -1)
    assert np.abs(d).sum() * g.width == pytest.approx(2 * hw)


def test_difference_rejects_fractional_shift():
    with pytest.raises(ValueError):
        finite_difference(np.ones(5), (0.5,), 1)


# -- Besov --------------------------------------------------------------------

def indicator_grid():
    g = Grid(center=(0.5,), half_width=2.0, bins=400)
    x = g.centers(0)
    return g, ((x >= 0) & (x < 1)).astype(float)


def test_seminorm_of_indicator():
    g, f = indicator_grid()
    assert besov_seminorm(f, g, 0.5, 1) == pytest.approx(2.0, rel=1e-12)
    assert besov_seminorm(np.zeros_like(f), g, 0.5, 1) == 0.0


def test_default_shift_set():
    g, _ = indicator_grid()
    sh = default_shifts(g)
    mags = sorted(abs(s[0]) for s in sh)
    assert len(mags) >= 12 and mags[0] == 1 and mags[-1] * g.width == pytest.approx(1.0)
    g2 = Grid(center=(0.0, 0.0), half_width=3.0, bins=60)
    sh2 = default_shifts(g2)
    assert (1, 1) in sh2 and (1, -1) in sh2
    assert all(math.hypot(*s) * g2.width <= 1 + 1e-12 for s in sh2)


@settings(deadline=None, max_examples=25)
@given(c=st.floats(-10, 10), seed=st.integers(0, 2 ** 32 - 1))
def test_seminorm_homogeneous(c, seed):
    g = Grid(center=(0.0, 0.0), half_width=2.0, bins=24)
    f = np.random.default_rng(seed).random(g.shape)
    assert besov_seminorm(c * f, g, 0.3) == pytest.approx(abs(c) * besov_seminorm(f, g, 0.3), rel=1e-12, abs=1e-12)


def test_seminorm_nondecreasing_in_alpha(rng):
    g = Grid(center=(0.0, 0.0), half_width=2.0, bins=32)
    f = rng.random(g.shape)
    vals = [besov_seminorm(f, g, a) for a in np.arange(0.1, 1.0, 0.1)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_besov_distance_examples(rng):
    g = Grid(center=(0.0, 0.0), half_width=2.0, bins=20)
    f = density_on(g, rng.random(g.shape))
    zero = density_on(g, np.zeros(g.shape))
    assert besov_distance(f, f, 0.3) == 0.0
    assert besov_distance(f, zero, 0.3) == pytest.approx(besov_norm(f, 0.3))
    with pytest.raises(GridMismatchError):
        besov_distance(f, density_on(Grid((0.0, 0.0), 2.0, 10), np.zeros((10, 10))), 0.3)


@settings(deadline=None, max_examples=25)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_besov_distance_triangle_inequality(seed):
    r = np.random.default_rng(seed)
    g = Grid(center=(0.0,), half_width=1.0, bins=64)
    f, h, k = (density_on(g, r.random(64)) for _ in range(3))
    assert besov_distance(f, k, 0.4) <= besov_distance(f, h, 0.4) + besov_distance(h, k, 0.4) + 1e-10


def test_besov_distance_dominates_l1(rng):
    g = Grid(center=(0.0, 0.0), half_width=2.0, bins=20)
    f, h = density_on(g, rng.random(g.shape)), density_on(g, rng.random(g.shape))
    assert besov_distance(f, h, 0.2) >= l1_distance(f, h)


# -- mollification -------------------------------------------------------------

def test_mollify_preserves_mass(rng):
    est = estimate_density(rng.standard_normal((100_000, 2)), 6.0, 60)
    for eps_cells in (1, 2, 3.5):
        m = mollify(est, eps_cells * est.grid.width)
        assert m.mass == pytest.approx(est.mass, abs=1e-8)
        assert np.all(m.values >= 0)


def test_mollify_point_mass_gives_bump():
    est = estimate_density(np.zeros(1000), 1.0, 41)
    m = mollify(est, 4 * est.grid.width)
    k = bump_kernel(4, 1)
    nz = np.flatnonzero(m.values)
    assert len(nz) == np.count_nonzero(k) == 7
    assert np.allclose(m.values[nz] / m.values[nz].sum(), k[k > 0])


def test_mollify_twice_vs_once_supports():
    est = estimate_density(np.zeros(1000), 1.0, 81)
    w = est.grid.width
    twice = mollify(mollify(est, 3 * w), 3 * w)
    once = mollify(est, 6 * w)
    a, b = np.flatnonzero(twice.values), np.flatnonzero(once.values)
    assert abs(a.min() - b.min()) <= 1 and abs(a.max() - b.max()) <= 1


def test_mollify_rejects_subcell_radius():
    est = estimate_density(np.zeros(1000), 1.0, 10)
    with pytest.raises(ValueError):
        mollify(est, 0.5 * est.grid.width)


def test_mollified_norms_stay_bounded_as_radius_shrinks(rng):
    x = rng.standard_normal((1_000_000, 2))
    est = estimate_density(x, 6.0, 48)
    w = est.grid.width
    norms = [besov_norm(mollify(est, r * w), 0.3) for r in (8, 4, 2, 1)]
    assert max(norms) / min(norms) < 1.5


# -- discrete integration by parts ----------------------------------------------

def test_ibp_random(rng):
    f = rng.random((30, 30))
    phi = np.zeros((30, 30))
    phi[6:24, 6:24] = rng.standard_normal((18, 18))
    for shift, n in (((2, 1), 1), ((1, -2), 2), ((0, 3), 2)):
        chk = discrete_ibp_check(f, phi, shift, n, cell_volume=0.01)
        assert chk.ok
    assert discrete_ibp_check(f, np.zeros_like(f), (1, 1), 2).lhs == 0.0


def test_ibp_hand_example():
    f = np.arange(1.0, 9.0)
    phi = np.array([0, 0, 1.0, 2.0, -1.0, 3.0, 0, 0])
    # sum_x (phi(x+1) - phi(x)) f(x) = sum_x phi(x) (f(x-1) - f(x))
    lhs = sum((phi[i + 1] - phi[i]) * f[i] for i in range(7)) + (0 - phi[7]) * f[7]
    rhs = sum(phi[i] * ((f[i - 1] if i else 0.0) - f[i]) for i in range(8))
    chk = discrete_ibp_check(f, phi, (1,), 1)
    assert chk.lhs == pytest.approx(lhs) and chk.rhs == pytest.approx(rhs) and chk.ok


# -- Hoelder fits ------------------------------------------------------------------

GAPS = np.geomspace(4e-3, 0.5, 12)


def test_fit_exact_power_law():
    fit = hoelder_fit(GAPS, 3 * GAPS ** 0.5)
    assert fit.slope == pytest.approx(0.5, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3))


def test_fit_noisy_power_law(rng):
    d = 3 * GAPS ** 0.5 * (1 + 0.05 * rng.standard_normal(len(GAPS)))
    assert 0.45 <= hoelder_fit(GAPS, d).slope <= 0.55


def test_fit_constant_distances():
    assert hoelder_fit(GAPS, np.full(12, 0.2)).slope == pytest.approx(0.0, abs=1e-12)


def test_fit_excludes_floor_and_refuses_sparse_data():
    d = GAPS ** 0.5
    fit = hoelder_fit(GAPS, d, noise_floor=d[3])
    assert not fit.used[:4].any() and fit.used[4:].all()
    with pytest.raises(FitRefusedError):
        hoelder_fit(GAPS, d, noise_floor=d[-4])


def test_fit_csv(tmp_path):
    fit = hoelder_fit(GAPS, GAPS ** 0.5, noise_floor=GAPS[2] ** 0.5)
    fit.to_csv(tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "gap,distance,used_flag"
    assert lines[1].endswith(",0") and lines[-1].endswith(",1")


def test_density_csv(tmp_path):
    g = Grid(center=(0.0, 0.0), half_width=1.0, bins=2)
    density_on(g, [[0.25, 0.25], [0.25, 0.25]]).to_csv(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "x0,x1,value" and len(lines) == 5
    assert lines[1] == "-0.5,-0.5,0.25"
