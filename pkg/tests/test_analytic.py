import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsdensity.analytic import (HeatKernelSpec, brownian_diff_check, difference_operator,
                                gaussian_density, gaussian_l1_1d_equal_var, gaussian_l1_distance,
                                gaussian_on_grid, heat_solution, markov_rep_check,
                                numgirsanov_quantity, ou_discrete_variance, ou_moments,
                                truncation_diagnostic)
from nsdensity.density import Grid, hoelder_fit
from nsdensity.ensemble import run_ensemble
from nsdensity.integrator import Model, SystemVariant
from nsdensity.noise import CovarianceSpec, SubspaceF, projected_covariance

COV2 = np.array([[1.0, 0.3], [0.3, 0.5]])


def gauss_phi(y):
    return np.exp(-0.5 * (np.atleast_2d(y) ** 2).sum(axis=1))


# -- heat semigroup -----------------------------------------------------------

def test_heat_solution_at_time_zero(rng):
    pts = rng.standard_normal((20, 2))
    assert np.array_equal(heat_solution(gauss_phi, pts, HeatKernelSpec(COV2, 0.0)), gauss_phi(pts))


def test_heat_solution_of_gaussian_density(rng):
    sigma0 = np.array([[0.8, 0.1], [0.1, 0.6]])
    t = 0.7
    phi = lambda y: gaussian_density(y, np.zeros(2), sigma0)
    pts = rng.standard_normal((15, 2))
    got = heat_solution(phi, pts, HeatKernelSpec(COV2, t), order=40)
    assert np.allclose(got, gaussian_density(pts, np.zeros(2), sigma0 + t * COV2), rtol=1e-8)


@settings(deadline=None, max_examples=20)
@given(seed=st.integers(0, 2 ** 32 - 1), t=st.floats(0.01, 3.0))
def test_heat_solution_contracts_sup_norm(seed, t):
    r = np.random.default_rng(seed)
    freqs, phases = r.normal(size=(4, 2)), r.uniform(0, 6, 4)
    amps = r.uniform(-1, 1, 4)
    phi = lambda y: np.tanh(np.cos(y @ freqs.T + phases) @ amps)
    pts = r.normal(scale=3, size=(50, 2))
    assert np.abs(heat_solution(phi, pts, HeatKernelSpec(COV2, t))).max() <= 1.0


def test_heat_semigroup_property(rng):
    pts = rng.standard_normal((10, 2))
    s, t = 0.3, 0.5
    inner = lambda y: heat_solution(gauss_phi, y, HeatKernelSpec(COV2, s))
    twice = heat_solution(inner, pts, HeatKernelSpec(COV2, t))
    once = heat_solution(gauss_phi, pts, HeatKernelSpec(COV2, s + t))
    assert np.allclose(twice, once, atol=1e-6)


def test_heat_spec_validation():
    with pytest.raises(ValueError):
        HeatKernelSpec(np.array([[1.0, 2.0], [2.0, 1.0]]), 0.1)
    with pytest.raises(ValueError):
        HeatKernelSpec(np.eye(2), -1.0)


# -- Markov representation -------------------------------------------------------

def test_markov_rep_equal_times_is_exact(rng):
    b = rng.standard_normal((500, 2))
    est = markov_rep_check(rng.normal(scale=0.1, size=500), b, b, gauss_phi, COV2, 0.0)
    assert est.gap == 0.0 and est.lhs == est.rhs


def test_markov_rep_linear_functional_without_drift(rng):
    x0 = np.array([0.4, -0.2])
    L = np.linalg.cholesky(COV2)
    b_s = x0 + math.sqrt(0.3) * rng.standard_normal((20_000, 2)) @ L.T
    b_t = b_s + math.sqrt(0.2) * rng.standard_normal((20_000, 2)) @ L.T
    phi = lambda y: y @ np.array([1.0, 2.0])
    est = markov_rep_check(np.zeros(20_000), b_s, b_t, phi, COV2, 0.2)
    assert est.ok()
    se = math.sqrt(np.array([1.0, 2.0]) @ COV2 @ np.array([1.0, 2.0]) * 0.5 / 20_000)
    assert abs(est.lhs - phi(x0[None])[0]) <= 4 * se


# -- Brownian differences -----------------------------------------------------------

def test_difference_operator_matches_binomial():
    phi = lambda y: (y ** 3).sum(axis=1)
    x = np.array([[0.5]])
    assert difference_operator(phi, x, np.array([0.1]), 3)[0] == pytest.approx(6 * 0.1 ** 3)


def test_brownian_diff_trivial_cases(rng):
    cov = np.eye(2)
    assert brownian_diff_check([0, 0], 0.4, 0.4, [0.1, 0], 2, gauss_phi, cov, 100, rng).lhs == 0.0
    assert brownian_diff_check([0, 0], 0.3, 0.4, [0, 0], 2, gauss_phi, cov, 100, rng).lhs == 0.0
    with pytest.raises(ValueError):
        brownian_diff_check([0, 0], 0.3, 0.4, [1.5, 0], 2, gauss_phi, cov, 100, rng)


def test_brownian_diff_h_halving_ratio(model2):
    cov_F = projected_covariance(model2.cov, model2.F).matrix
    a, h = np.full(2, 0.1), np.array([0.1, 0.0])
    big = brownian_diff_check(a, 0.3, 0.5, h, 2, gauss_phi, cov_F, 100_000, np.random.default_rng(3))
    small = brownian_diff_check(a, 0.3, 0.5, h / 2, 2, gauss_phi, cov_F, 100_000, np.random.default_rng(3))
    assert 2.8 <= big.lhs / small.lhs <= 5.7
    assert big.bound_shape / small.bound_shape == pytest.approx(4.0)


def test_brownian_diff_linear_in_time_gap():
    a, h = np.zeros(1), np.array([0.2])
    vals = [brownian_diff_check(a, 0.5, 0.5 + g, h, 1, lambda y: np.tanh(y[:, 0] + 0.3), np.eye(1),
                                100_000, np.random.default_rng(5)).lhs for g in (0.02, 0.04, 0.08)]
    fit = hoelder_fit(np.array([0.02, 0.04, 0.08, 0.16]),
                      np.array(vals + [brownian_diff_check(a, 0.5, 0.66, h, 1, lambda y: np.tanh(y[:, 0] + 0.3),
                                                           np.eye(1), 100_000, np.random.default_rng(5)).lhs]))
    assert 0.7 <= fit.slope <= 1.3


# -- Gaussian closed forms ---------------------------------------------------------

def test_gaussian_l1_closed_form_agrees_with_quadrature():
    assert gaussian_l1_distance(0.0, 1.0, 0.3, 1.0) == pytest.approx(gaussian_l1_1d_equal_var(0.3, 1.0), abs=1e-5)
    assert gaussian_l1_distance([0, 0], [1, 1], [0, 0], [1, 1], points=201) == pytest.approx(0.0, abs=1e-12)


def test_gaussian_on_grid_has_unit_mass():
    g = Grid(center=(0.0, 0.0), half_width=8.0, bins=64)
    assert gaussian_on_grid(g, [0.2, -0.1], [1.0, 0.5]).mass == pytest.approx(1.0, abs=1e-10)


def test_ou_moments_and_discrete_variance():
    lam = np.array([1.0, 2.0])
    mean, var = ou_moments([1.0, 1.0], [1.0, 0.5], lam, 1.0, 0.5)
    assert np.allclose(mean, np.exp(-lam * 0.5))
    assert np.allclose(var, [1.0, 0.25] * -np.expm1(-lam) / (2 * lam))
    dv = ou_discrete_variance([1.0, 0.5], lam, 1.0, 1e-4, 5000)
    assert np.allclose(dv, var, rtol=1e-3)


# -- simulated checks ------------------------------------------------------------

@pytest.fixture(scope="module")
def model1(basis1):
    return Model(basis=basis1, cov=CovarianceSpec.from_basis(basis1, gamma=0.8), F=SubspaceF((0, 1)))


@pytest.fixture(scope="module")
def x0_1(model1):
    x = np.random.default_rng(4).standard_normal(model1.size)
    return 2.0 * x / np.linalg.norm(x)


def test_reduced_system_is_brownian_on_F(model1, x0_1):
    dt, k = 1e-3, 10
    ens = run_ensemble(model1, x0_1, SystemVariant.reduced(), k * dt, dt, 4000, 9,
                       [i * dt for i in range(k + 1)], record_indices=[0, 1], workers=1)
    inc = np.diff(ens.states, axis=1)                      # (paths, k, 2)
    sig = model1.cov.sigmas[[0, 1]]
    emp = np.cov(inc.reshape(-1, 2).T)
    assert np.allclose(np.diag(emp), sig ** 2 * dt, rtol=0.05)
    assert abs(emp[0, 1]) <= 0.05 * sig.prod() * dt
    corr = np.corrcoef(inc[:, 0, 0], inc[:, 1, 0])[0, 1]
    assert abs(corr) < 4 / math.sqrt(4000)


@pytest.fixture(scope="module")
def coupled(model1, x0_1):
    times = [0.1, 0.125, 0.15, 0.2, 0.3, 0.5]
    kw = dict(record_indices=[0, 1], workers=1)
    red = run_ensemble(model1, x0_1, SystemVariant.reduced(), 0.5, 1e-3, 4000, 21, times,
                       weight_threshold=math.inf, **kw)
    full = run_ensemble(model1, x0_1, SystemVariant.full(), 0.5, 1e-3, 4000, 21, times, **kw)
    return times, red, full


def test_markov_rep_generic(coupled, model1):
    times, red, _ = coupled
    cov_F = projected_covariance(model1.cov, model1.F).matrix
    s, t = 0.2, 0.3
    lg = red.log_weight(s)
    lg = np.where(np.isfinite(lg), lg, -np.inf)
    est = markov_rep_check(lg, red.coords(s), red.coords(t), gauss_phi, cov_F, t - s)
    assert est.ok()


def test_numgirsanov_vanishes_with_power_law(coupled):
    times, red, full = coupled
    s = times[0]
    psi = lambda y: np.minimum(np.abs(y[:, 0] - 0.2) ** 0.8, 1.0)
    gaps, vals = [], []
    for t in times[1:]:
        v, _ = numgirsanov_quantity(psi, full.coords(s), full.coords(t), red.coords(s), red.coords(t))
        gaps.append(t - s)
        vals.append(v)
    assert hoelder_fit(np.array(gaps), np.array(vals)).slope >= 0.8 / 2 - 0.15


def test_truncation_diagnostic(model1, x0_1, coupled):
    times, red, _ = coupled
    s, t = 0.2, 0.3
    integ = red.stopping_integral(t)
    levels = [float(np.quantile(integ, q)) for q in (0.2, 0.6, 0.95)] + [1e12]
    runs = {}
    for n in levels:
        e = run_ensemble(model1, x0_1, SystemVariant.truncated(n), 0.5, 1e-3, 4000, 21, times,
                         record_indices=[0, 1], workers=1)
        runs[n] = (e.log_weight(s), e.coords(t))
    rows = truncation_diagnostic(gauss_phi, red.coords(t), runs, integ, [0.1, 0.5, 1.0], 0.5, 2.0)
    assert rows[-1].value == pytest.approx(0.0, abs=1e-12)
    for a, b in zip(rows, rows[1:]):
        assert b.value <= a.value + 3 * max(a.stderr, b.stderr)
        assert b.tail_probability <= a.tail_probability
    const = truncation_diagnostic(lambda y: np.ones(len(y)), red.coords(t), runs, integ, [0.5], 0.5, 2.0)
    assert all(r.value == 0.0 for r in const)
