import numpy as np
import pytest
from scipy import stats

from sigval.errors import InvalidArgumentError
from sigval.models import (
    BSD,
    FBM,
    FOU,
    OU,
    RSAR1,
    BSDAutocorr,
    GammaRW,
    Heston,
    Joint2D,
    RoughHeston,
    SimGrid,
    bsd_autocorr_matched,
    fbm_covariance,
    heston_variance,
    rough_heston_variance,
    simulate,
    simulate_bsd,
    simulate_bsd_autocorr,
    simulate_heston,
    simulate_rough_heston,
    simulate_rsar1_paths,
    spec_to_dict,
    stationary_distribution,
    subsample,
    toeplitz_eigenvalues,
    tridiagonal_correlation,
    volterra_weights,
)

RSAR = RSAR1((0.002, 0.006), (0.45, 0.6), (0.0025, 0.004), ((0.95, 0.05), (0.1, 0.9)))


def test_fbm_covariance_values():
    c = fbm_covariance(0.1, np.array([0.5, 1.0]))
    assert c[1, 1] == pytest.approx(1.0)
    assert c[0, 1] == pytest.approx(0.5)


def test_fbm_variance_and_covariance_within_standard_errors():
    x = simulate(FBM(0.3), SimGrid(4000, seed=3)).values[:, :, 0]
    emp = np.cov(x[:, [6, 12]].T)
    target = fbm_covariance(0.3, np.array([0.5, 1.0]))
    se = np.sqrt((target[0, 0] * target[1, 1] + target**2) / x.shape[0])
    assert np.all(np.abs(emp - target) < 4 * se)
    assert np.all(x[:, 0] == 0.0)


def test_fbm_increment_correlation_sign():
    def lag1(h):
        dx = np.diff(simulate(FBM(h), SimGrid(3000, seed=4)).values[:, :, 0], axis=1)
        return np.corrcoef(dx[:, 3], dx[:, 4])[0, 1]

    assert abs(lag1(0.5)) < 0.05
    assert lag1(0.1) < -0.2
    assert lag1(0.8) > 0.2


def test_bsd_without_volatility_is_deterministic():
    s = simulate_bsd(BSD(0.05, ((0.0, 0.0),)), SimGrid(3, seed=1))
    np.testing.assert_allclose(s.values[:, :, 0], np.exp(0.05 * s.times)[None].repeat(3, axis=0))


def test_bsd_terminal_log_price_is_gaussian():
    s = simulate_bsd(BSD(0.05, ((0.0, 0.2),)), SimGrid(5000, seed=2))
    logs1 = np.log(s.values[:, -1, 0])
    assert stats.kstest(logs1, "norm", args=(0.05 - 0.02, 0.2)).pvalue > 0.01


def test_bsd_step_volatility_has_matching_variance():
    s = simulate_bsd(BSD(0.05, ((0.0, 0.0), (0.5, 0.2 * np.sqrt(2)))), SimGrid(5000, seed=5))
    logs = np.log(s.values[:, :, 0])
    np.testing.assert_allclose(logs[:, 6], logs[0, 6])
    v = logs[:, -1].var(ddof=1)
    assert abs(v - 0.04) < 4 * 0.04 * np.sqrt(2 / 5000)


def test_bsd_knot_validation():
    with pytest.raises(InvalidArgumentError):
        BSD(0.05, ((0.1, 0.2),))
    with pytest.raises(InvalidArgumentError):
        BSD(0.05, ((0.0, 0.2), (0.0, 0.3)))


def test_autocorrelated_bsd_with_zero_rho_is_plain_bsd():
    grid = SimGrid(4, seed=9)
    a = simulate_bsd_autocorr(BSDAutocorr(0.05, 0.2, 0.2, 0.0), grid)
    b = simulate_bsd(BSD(0.05, ((0.0, 0.2),)), grid)
    np.testing.assert_allclose(a.values, b.values, rtol=1e-12)


def test_autocorrelated_bsd_shock_correlation():
    spec = BSDAutocorr(0.0, 0.2, 0.2, 0.4)
    s = simulate_bsd_autocorr(spec, SimGrid(6000, seed=6))
    r = np.diff(np.log(s.values[:, :, 0]), axis=1)
    assert np.corrcoef(r[:, 4], r[:, 5])[0, 1] == pytest.approx(0.4, abs=0.04)
    assert np.corrcoef(r[:, 2], r[:, 4])[0, 1] == pytest.approx(0.0, abs=0.04)


def test_toeplitz_eigenvalues_match_dense_solver():
    lam = toeplitz_eigenvalues(0.5, 12)
    assert lam.min() == pytest.approx(0.0290, abs=1e-4)
    np.testing.assert_allclose(np.sort(lam), np.linalg.eigvalsh(tridiagonal_correlation(0.5, 12)), atol=1e-12)


def test_matched_autocorrelated_bsd_keeps_terminal_law():
    spec = bsd_autocorr_matched(0.05, 0.2, 0.5)
    assert spec.gamma1 == pytest.approx(0.2 / np.sqrt(2))
    s = simulate_bsd_autocorr(spec, SimGrid(6000, seed=11))
    logs1 = np.log(s.values[:, -1, 0])
    assert stats.kstest(logs1, "norm", args=(0.05 - 0.02, 0.2)).pvalue > 0.01
    with pytest.raises(InvalidArgumentError):
        bsd_autocorr_matched(0.05, 0.2, 0.5, n_steps=11)


def test_autocorrelated_bsd_rho_range():
    # inside [-0.5, 0.5] the tridiagonal correlation stays positive definite for every N
    assert toeplitz_eigenvalues(0.5, 1200).min() > 0
    assert toeplitz_eigenvalues(-0.5, 1200).min() > 0
    with pytest.raises(InvalidArgumentError, match="rho"):
        BSDAutocorr(0.0, 0.2, 0.2, 0.6)
    with pytest.raises(InvalidArgumentError, match="rho"):
        bsd_autocorr_matched(0.05, 0.2, 0.7)


def _variance_mean_ode(spec, t):
    e = np.exp(-spec.lam * t)
    return spec.v0 * e + spec.theta / spec.lam * (1 - e)


def test_heston_mean_variance_follows_ode():
    spec = Heston(v0=0.04, theta=0.03, lam=1.5, sigma=0.3, rho=-0.7)
    _, v = simulate_heston(spec, SimGrid(4000, steps_per_year=252, seed=3), return_variance=True)
    t = np.linspace(0, 1, 253)
    for k in (63, 126, 252):
        se = v[:, k].std(ddof=1) / np.sqrt(v.shape[0])
        # the scheme's bias is O(dt), far below the Monte Carlo error here
        assert abs(v[:, k].mean() - _variance_mean_ode(spec, t[k])) < 3 * se + 1e-4
    assert np.all(v >= 0)


def test_heston_without_vol_of_vol_keeps_variance():
    spec = Heston(v0=0.04, theta=1e-20, lam=0.0, sigma=1e-10)
    v = heston_variance(spec, 1 / 12, np.random.default_rng(0).normal(size=(3, 12)) * np.sqrt(1 / 12))
    np.testing.assert_allclose(v, 0.04, rtol=1e-8)


def test_heston_scheme_precondition():
    with pytest.raises(InvalidArgumentError, match="E\\(0\\)"):
        heston_variance(Heston(theta=0.01, sigma=0.5), 1 / 12, np.zeros((1, 12)))


def test_volterra_weights():
    np.testing.assert_allclose(volterra_weights(0.5, 0.01, 5), 1.0)
    w = volterra_weights(0.1, 1 / 252, 252)
    assert np.all(np.diff(w) < 0)
    # the weights sum to the integral of the kernel over the whole horizon
    from math import gamma

    a = 0.6
    assert w.sum() / 252 == pytest.approx(1.0**a / gamma(a + 1), rel=1e-12)


def test_rough_heston_at_half_is_euler_heston():
    spec = RoughHeston(v0=0.04, theta=0.03, lam=1.5, sigma=0.3, hurst=0.5)
    db = np.random.default_rng(2).normal(size=(5, 50)) * np.sqrt(0.02)
    v = rough_heston_variance(spec, 0.02, db)
    euler = np.empty_like(v)
    euler[:, 0] = spec.v0
    for k in range(50):
        vp = np.maximum(euler[:, k], 0.0)
        euler[:, k + 1] = euler[:, k] + (spec.theta - spec.lam * vp) * 0.02 + spec.sigma * np.sqrt(vp) * db[:, k]
    np.testing.assert_allclose(v, euler, atol=1e-12)


def test_rough_heston_mean_variance_at_half():
    spec = RoughHeston(v0=0.04, theta=0.03, lam=1.5, sigma=0.2, hurst=0.5)
    _, v = simulate_rough_heston(spec, SimGrid(3000, steps_per_year=100, seed=8), return_variance=True)
    se = v[:, -1].std(ddof=1) / np.sqrt(v.shape[0])
    assert abs(v[:, -1].mean() - _variance_mean_ode(spec, 1.0)) < 3 * se + 1e-4


def test_rsar_stationary_distribution():
    np.testing.assert_allclose(RSAR.stationary, [2 / 3, 1 / 3])
    with pytest.raises(InvalidArgumentError):
        stationary_distribution(np.eye(2))
    with pytest.raises(InvalidArgumentError):
        RSAR1((0.0,), (0.0,), (0.1,), ((0.9, 0.2),))


def test_rsar_regime_frequencies():
    paths = simulate_rsar1_paths(RSAR, SimGrid(2000, steps_per_year=12, horizon=5.0, seed=1))
    freq = np.mean(paths.regimes == 1)
    assert freq == pytest.approx(1 / 3, abs=0.03)
    np.testing.assert_allclose(np.diff(paths.index.values[:, :, 0], axis=1), paths.returns, atol=1e-15)


def test_single_regime_without_ar_is_iid_gaussian():
    spec = RSAR1((0.01,), (0.0,), (0.02,), ((1.0,),))
    x = simulate_rsar1_paths(spec, SimGrid(3000, seed=2)).returns
    assert stats.kstest(x[:, 5], "norm", args=(0.01, 0.02)).pvalue > 0.01
    assert abs(np.corrcoef(x[:, 5], x[:, 6])[0, 1]) < 0.06


def test_gamma_random_walk_annual_mean():
    spec = GammaRW(-0.002, 0.5, 0.01)
    x = simulate(spec, SimGrid(4000, seed=3)).values[:, -1, 0]
    mean = 12 * (spec.gamma_shift + spec.alpha_shape * spec.beta_scale)
    se = np.sqrt(12 * spec.alpha_shape * spec.beta_scale**2 / 4000)
    assert abs(x.mean() - mean) < 4 * se


def test_ou_relaxes_deterministically_without_noise():
    s = simulate(OU(1.0, 2.0, 0.0, y0=3.0), SimGrid(2, seed=0))
    np.testing.assert_allclose(s.values[0, :, 0], 1.0 + 2.0 * np.exp(-2.0 * s.times))


def test_ou_stationary_variance():
    spec = OU(0.0, 4.0, 0.5)
    y = simulate(spec, SimGrid(4000, steps_per_year=12, horizon=2.0, seed=1)).values[:, -1, 0]
    target = 0.25 / 8.0
    assert abs(y.var(ddof=1) - target) < 4 * target * np.sqrt(2 / 4000)


def test_fou_at_half_agrees_with_ou():
    grid_a, grid_b = SimGrid(3000, steps_per_year=252, seed=1), SimGrid(3000, steps_per_year=252, seed=2)
    a = simulate(FOU(0.5, 0.0, 3.0, 0.4, y0=0.5), grid_a).values[:, -1, 0]
    b = simulate(OU(0.0, 3.0, 0.4, y0=0.5), grid_b).values[:, -1, 0]
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_joint_model_return_correlation_sign():
    def corr(c):
        spec = Joint2D(RoughHeston(), RSAR, c)
        v = simulate(spec, SimGrid(1500, seed=4)).values
        rs, ri = np.diff(np.log(v[:, :, 0]), axis=1), np.diff(np.log(v[:, :, 1]), axis=1)
        return np.corrcoef(rs.ravel(), ri.ravel())[0, 1]

    assert corr(0.5) > 0.2
    assert corr(-0.5) < -0.2
    assert abs(corr(0.0)) < 0.05


def test_joint_model_marginals_do_not_depend_on_correlation():
    grid = SimGrid(2000, seed=5)
    a = simulate(Joint2D(RoughHeston(), RSAR, 0.0), grid).values
    b = simulate(Joint2D(RoughHeston(), RSAR, 0.5), SimGrid(2000, seed=6)).values
    for j in (0, 1):
        assert stats.ks_2samp(np.log(a[:, -1, j]), np.log(b[:, -1, j])).pvalue > 0.01


def test_joint_model_needs_monthly_grid():
    with pytest.raises(InvalidArgumentError, match="steps_per_year=12"):
        simulate(Joint2D(RoughHeston(), RSAR, 0.2), SimGrid(2, steps_per_year=120))
    with pytest.raises(InvalidArgumentError):
        Joint2D(RoughHeston(rho=-0.9), RSAR, 0.9)


def test_paths_do_not_depend_on_sample_size():
    for spec in (FBM(0.2), Heston(), RSAR, OU(0.0, 1.0, 0.3)):
        small = simulate(spec, SimGrid(3, seed=7)).values
        large = simulate(spec, SimGrid(10, seed=7)).values
        np.testing.assert_array_equal(small, large[:3])
    other = simulate(FBM(0.2), SimGrid(3, seed=8)).values
    assert not np.allclose(other, simulate(FBM(0.2), SimGrid(3, seed=7)).values)


def test_classic_and_rough_heston_share_noise():
    grid = SimGrid(2, steps_per_year=252, seed=3)
    a = simulate_heston(Heston(), grid)
    b = simulate_rough_heston(RoughHeston(hurst=0.5), grid)
    # same Brownian drivers, different variance schemes, so close but not equal
    assert np.max(np.abs(np.log(a.values) - np.log(b.values))) < 0.05


def test_subsample_and_grid_validation():
    s = simulate(FBM(0.3), SimGrid(2, steps_per_year=120, seed=0))
    t = subsample(s, 10)
    assert t.values.shape == (2, 13, 1)
    np.testing.assert_array_equal(t.values[:, -1], s.values[:, -1])
    with pytest.raises(InvalidArgumentError):
        subsample(s, 7)
    with pytest.raises(InvalidArgumentError):
        SimGrid(0)
    with pytest.raises(InvalidArgumentError):
        FBM(1.0)


def test_spec_to_dict_nests_components():
    d = spec_to_dict(Joint2D(RoughHeston(), RSAR, 0.3))
    assert d["kind"] == "joint2d" and d["rough"]["kind"] == "rough_heston"
    assert d["rsar1"]["P"] == [[0.95, 0.05], [0.1, 0.9]]
