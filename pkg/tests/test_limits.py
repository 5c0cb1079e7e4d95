import math
from dataclasses import replace

import numpy as np
import pytest

from coxflow import (
    ModelParams,
    clt_verify_h,
    clt_verify_hinv,
    clt_verify_mu,
    clt_verify_yt,
    corollary_variance,
    rmse_ratio_check,
    simulate_window_counts,
    theorem1_variance,
    theorem2_variance,
)
from coxflow.cycles import CycleStatistics
from coxflow.limits import rho_double_integral, rho_row_integral, rho_value


# ---------------------------------------------------------------------------
# conditional-Poisson window sampler
# ---------------------------------------------------------------------------


def test_window_counts_deterministic(linear_h):
    params = ModelParams(sigma=1.0, mu=100.0, horizon=2.0, bins=20, seed=71)
    a = simulate_window_counts(params, linear_h, substeps=8)
    b = simulate_window_counts(params, linear_h, substeps=8)
    assert a.u0 == b.u0
    np.testing.assert_array_equal(a.counts, b.counts)
    np.testing.assert_array_equal(a.y_at_edges, b.y_at_edges)
    c = simulate_window_counts(params, linear_h, substeps=8, stream=1)
    assert c.u0 != a.u0


def test_window_counts_shapes(linear_h):
    params = ModelParams(sigma=1.0, mu=100.0, horizon=2.0, bins=20, seed=71)
    wc = simulate_window_counts(params, linear_h, substeps=8)
    assert wc.counts.shape == (20,)
    assert wc.y_at_edges.shape == (21,)
    assert np.all((wc.y_at_edges >= 0) & (wc.y_at_edges < 1))
    assert 0.0 <= wc.u0 < 1.0
    assert wc.n_events == wc.counts.sum()
    with pytest.raises(ValueError):
        simulate_window_counts(params, linear_h, substeps=1)


def test_window_counts_theta_normalized(linear_h):
    params = ModelParams(sigma=1.0, mu=500.0, horizon=4.0, bins=25, seed=73)
    wc = simulate_window_counts(params, linear_h)
    assert wc.theta.mean() == pytest.approx(1.0, abs=1e-12)


def test_window_counts_empty_theta_errors(linear_h):
    params = ModelParams(sigma=1.0, mu=1e-6, horizon=0.5, bins=4, seed=73)
    wc = simulate_window_counts(params, linear_h)
    assert wc.n_events == 0
    with pytest.raises(ValueError):
        wc.theta


def test_window_counts_poisson_law(const_h):
    """With a flat response the total count is exactly Poisson(mu*T)."""
    params = ModelParams(sigma=1.0, mu=50.0, horizon=2.0, bins=10, seed=79)
    totals = np.array(
        [simulate_window_counts(params, const_h, substeps=4, stream=r).n_events
         for r in range(400)],
        dtype=float,
    )
    lam = 100.0
    assert abs(totals.mean() - lam) <= 3.0 * math.sqrt(lam / 400)
    assert abs(totals.var(ddof=1) - lam) <= 3.0 * lam * math.sqrt(2.0 / 400) + 5.0


# ---------------------------------------------------------------------------
# variance assembly from the covariance grid
# ---------------------------------------------------------------------------


def synthetic_stats(t_grid, rho, sigma=1.0):
    m = len(t_grid)
    zeros = np.zeros(m)
    return CycleStatistics(
        sigma=sigma, step=1e-4, n_cycles=10_000, t_grid=np.asarray(t_grid, float),
        mean_tau1=1.0, se_mean_tau1=0.0, mean_tau1_sq=5.0 / 3.0,
        se_mean_tau1_sq=0.0, mean_zh=0.0, se_mean_zh=0.0, var_zh=0.02,
        se_var_zh=0.0, rho_grid=np.asarray(rho, float), se_rho=np.zeros((m, m)),
        mean_ze=zeros, se_mean_ze=zeros, mean_y_integral=0.5,
        se_mean_y_integral=0.0, mean_occ=zeros, se_mean_occ=zeros,
    )


@pytest.fixture(scope="module")
def separable_stats(linear_h):
    """rho(t1,t2) = f(t1) f(t2) on the grid, with f vanishing at the ends so
    the piecewise-linear extension is smooth at the appended boundary."""
    t_grid = np.linspace(0.0, 1.9, 96)
    f = t_grid * (1.9 - t_grid)
    return synthetic_stats(t_grid, np.outer(f, f)), t_grid, f


def test_rho_value_interpolates_grid(separable_stats, linear_h):
    stats, t_grid, f = separable_stats
    for i in (0, 10, 50):
        for j in (3, 40):
            assert rho_value(stats, linear_h, t_grid[i], t_grid[j]) == pytest.approx(
                f[i] * f[j]
            )


def test_separable_assembly_identities(separable_stats, linear_h):
    """For separable rho the quadrature assembly factorizes analytically."""
    stats, t_grid, f = separable_stats
    t_ext = np.append(t_grid, 2.0)
    f_ext = np.append(f, 0.0)
    integral_f = float(np.trapezoid(f_ext, t_ext))
    t = 1.0
    f_t = float(np.interp(t, t_ext, f_ext))
    assert rho_row_integral(stats, linear_h, t) == pytest.approx(f_t * integral_f)
    assert rho_double_integral(stats, linear_h) == pytest.approx(integral_f**2)
    # theorem-1 assembly collapses to a perfect square
    c = t / 2.0
    expected = (f_t - c * integral_f) ** 2
    assert theorem1_variance(stats, linear_h, t) == pytest.approx(expected)
    # theorem-2 assembly at u with h(u)=t: (h' f_t - h(u) integral_f)^2
    expected2 = (2.0 * f_t - t * integral_f) ** 2
    assert theorem2_variance(stats, linear_h, 0.5) == pytest.approx(expected2)


def test_corollary_variance_separable(separable_stats, linear_h):
    stats, t_grid, f = separable_stats
    t_ext = np.append(t_grid, 2.0)
    f_ext = np.append(f, 0.0)
    u = np.linspace(0.0, 1.0, 100_001)
    expected = np.trapezoid(np.interp(2.0 * u, t_ext, f_ext) ** 2, u)
    # the assembly integrates the squared interpolant on its own 801-point grid
    assert corollary_variance(stats, linear_h) == pytest.approx(expected, rel=1e-3)


def test_variance_assembly_scales_with_sigma(separable_stats, linear_h):
    stats, _, _ = separable_stats
    scaled = replace(stats, sigma=2.0)
    assert theorem1_variance(scaled, linear_h, 1.0) == pytest.approx(
        4.0 * theorem1_variance(stats, linear_h, 1.0)
    )


def test_variance_domain_errors(stats_small, linear_h, const_h):
    with pytest.raises(ValueError):
        theorem1_variance(stats_small, linear_h, 0.0)
    with pytest.raises(ValueError):
        theorem1_variance(stats_small, linear_h, 2.0)
    with pytest.raises(ValueError):
        theorem2_variance(stats_small, linear_h, 1.0)
    with pytest.raises(ValueError):
        theorem1_variance(stats_small, const_h, 0.5)  # flat response, h' = 0


def test_rho_vanishes_at_supremum(stats_small, linear_h):
    # the centered occupation functional degenerates at the response supremum
    near = rho_value(stats_small, linear_h, 1.999, 1.0)
    assert abs(near) < 0.05 * abs(rho_value(stats_small, linear_h, 1.0, 1.0))


# ---------------------------------------------------------------------------
# replicated CLT smoke checks (loose bounds; the acceptance suite tightens)
# ---------------------------------------------------------------------------


def test_clt_mu_smoke(stats_small, linear_h):
    params = ModelParams(sigma=1.0, mu=1e4, horizon=10.0, bins=500, seed=83)
    report = clt_verify_mu(params, linear_h, 150, stats_small, substeps=16)
    assert report.n_reps == 150
    assert abs(report.mean_z_score) < 4.0
    assert 0.5 < report.var_ratio < 1.6
    assert report.samples.shape == (150,)


def test_clt_hinv_smoke(stats_small, linear_h):
    params = ModelParams(sigma=1.0, mu=1e5, horizon=20.0, bins=10_000, seed=83)
    report = clt_verify_hinv(params, linear_h, 1.0, 150, stats_small, substeps=8)
    assert abs(report.mean_z_score) < 4.0
    assert 0.5 < report.var_ratio < 1.5
    with pytest.raises(ValueError):
        clt_verify_hinv(params, linear_h, 2.5, 10, stats_small)


def test_clt_h_smoke(stats_small, linear_h, const_h):
    params = ModelParams(sigma=1.0, mu=1e5, horizon=20.0, bins=10_000, seed=83)
    report = clt_verify_h(params, linear_h, 0.5, 150, stats_small, substeps=8)
    assert abs(report.mean_z_score) < 4.0
    assert 0.4 < report.var_ratio < 1.6
    with pytest.raises(ValueError):
        clt_verify_h(params, const_h, 0.5, 10, stats_small)
    with pytest.raises(ValueError):
        clt_verify_h(params, linear_h, 1.0, 10, stats_small)


def test_clt_yt_window_validation(stats_small, linear_h):
    params = ModelParams(sigma=1.0, mu=1e4, horizon=5.0, bins=100, seed=83)
    with pytest.raises(ValueError):
        clt_verify_yt(params, linear_h, 10, stats_small, window_index=0)
    with pytest.raises(ValueError):
        clt_verify_yt(params, linear_h, 10, stats_small, window_index=101)


def test_rmse_ratio_smoke(linear_h):
    small = ModelParams(sigma=1.0, mu=2e4, horizon=4.0, bins=1000, seed=89)
    large = ModelParams(sigma=1.0, mu=2.56e6, horizon=16.0, bins=8000, seed=89)
    report = rmse_ratio_check(small, large, linear_h, 1.0, 150, substeps=16)
    assert report.rmse_small > report.rmse_large > 0
    assert 1.4 < report.ratio < 2.7
