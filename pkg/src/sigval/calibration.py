"""Parameter estimation for the historical validation pipelines.

Volatility side: Hurst exponent from the scaling of lagged absolute moments,
fractional OU by the method of moments, ordinary OU by exact AR(1) maximum
likelihood. Inflation side: Gamma random walk by matching three annual
moments, RSAR(1) by Hamilton-filter maximum likelihood.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass
from math import gamma as gamma_fn

import numba
import numpy as np
from scipy import optimize

from sigval.errors import EstimationError, InvalidArgumentError, NumericalError
from sigval.models import FOU, OU, RSAR1, GammaRW

log = logging.getLogger(__name__)

DAILY_DT = 1.0 / 252
DEFAULT_Q = (0.5, 1.0, 1.5, 2.0, 3.0)


@dataclass(frozen=True)
class AnnualMoments:
    m1: float
    m2c: float
    m3c: float

    def __post_init__(self):
        if not self.m2c > 0:
            raise InvalidArgumentError(f"m2c must be positive, got {self.m2c}")

    @classmethod
    def from_sample(cls, x) -> AnnualMoments:
        """Mean and (biased, 1/n) central second and third moments."""
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.size < 3:
            raise InvalidArgumentError("need at least 3 values to estimate three moments")
        c = x - x.mean()
        return cls(float(x.mean()), float(np.mean(c**2)), float(np.mean(c**3)))


@dataclass(frozen=True)
class HurstFit:
    hurst: float
    slopes: tuple  # ξ_q
    intercepts: tuple  # β_q
    q: tuple
    lags: tuple
    regression_intercept: float


# ---------------------------------------------------------------------------
# volatility models
# ---------------------------------------------------------------------------


def estimate_hurst(
    y, q_list=DEFAULT_Q, max_lag: int = 252, dt: float = DAILY_DT
) -> HurstFit:
    """Two-stage scaling regression.

    For each lag ``ℓ`` the ``q``-th empirical absolute moment of the
    non-overlapping ``ℓ``-step differences is computed; the slope of its log
    against ``log(ℓ dt)`` is ``ξ_q``, and the slope of ``ξ_q`` against ``q`` is ``Ĥ``.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.size < 2 * max_lag:
        raise InvalidArgumentError(f"series of length {y.size} is shorter than 2*max_lag={2 * max_lag}")
    q_arr = np.asarray(q_list, dtype=np.float64)
    lags = np.arange(1, max_lag + 1)
    moments = np.empty((lags.size, q_arr.size))
    for i, lag in enumerate(lags):
        d = np.abs(np.diff(y[::lag]))
        moments[i] = np.mean(d[:, None] ** q_arr[None, :], axis=0)
    slopes, intercepts = [], []
    x_all = np.log(lags * dt)
    for j, q in enumerate(q_arr):
        ok = moments[:, j] > 0
        if not ok.all():
            warnings.warn(f"dropping {np.count_nonzero(~ok)} lags with zero moment at q={q}", RuntimeWarning)
        if np.count_nonzero(ok) < 10:
            raise EstimationError(f"fewer than 10 usable lags at q={q}")
        slope, icpt = np.polyfit(x_all[ok], np.log(moments[ok, j]), 1)
        slopes.append(float(slope))
        intercepts.append(float(icpt))
    h, c = np.polyfit(q_arr, np.array(slopes), 1)
    return HurstFit(float(h), tuple(slopes), tuple(intercepts), tuple(q_arr.tolist()), tuple(lags.tolist()), float(c))


def fit_fou_moments(y, hurst: float, dt: float = DAILY_DT) -> FOU:
    """Method-of-moments fractional OU; ``σ`` first since ``α`` depends on it."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if not 0.0 < hurst < 1.0:
        raise InvalidArgumentError(f"hurst must be in (0, 1), got {hurst}")
    n = y.size
    if n < 3:
        raise InvalidArgumentError("need at least 3 observations")
    theta = float(y.mean())
    d2 = y[2:] - 2.0 * y[1:-1] + y[:-2]
    sigma2 = np.sum(d2**2) / (n * (4.0 - 2.0 ** (2 * hurst)) * dt ** (2 * hurst))
    denom = n * np.sum(y**2) - np.sum(y) ** 2
    if not sigma2 > 0 or not denom > 0:
        raise NumericalError("degenerate moments: the series has no variability")
    alpha = (n**2 * sigma2 * hurst * gamma_fn(2 * hurst) / denom) ** (1.0 / (2 * hurst))
    return FOU(hurst=float(hurst), theta=theta, alpha=float(alpha), sigma=float(np.sqrt(sigma2)))


def fit_ou_mle(y, dt: float = DAILY_DT) -> OU:
    """Exact maximum likelihood of the OU transition via AR(1) regression."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.size < 3:
        raise InvalidArgumentError("need at least 3 observations")
    x0, x1 = y[:-1], y[1:]
    a, b = np.polyfit(x0, x1, 1)
    if not 0.0 < a < 1.0:
        raise EstimationError(f"AR(1) slope {a:.4g} outside (0, 1): no mean reversion to fit")
    resid = x1 - (a * x0 + b)
    s2 = float(np.mean(resid**2))
    alpha = -np.log(a) / dt
    theta = b / (1.0 - a)
    sigma = np.sqrt(s2 * 2.0 * alpha / (1.0 - a**2))
    return OU(theta=float(theta), alpha=float(alpha), sigma=float(sigma))


# ---------------------------------------------------------------------------
# annual moments and the Gamma random walk
# ---------------------------------------------------------------------------


def _regime_paths(k: int, months: int) -> np.ndarray:
    return np.array(list(itertools.product(range(k), repeat=months)), dtype=np.int64).reshape(-1, months)


def rsar1_annual_moments(
    spec: RSAR1, months: int = 12, max_paths: int = 2_000_000, mc_draws: int = 1_000_000, seed: int = 0
) -> AnnualMoments:
    """Moments of ``X_1 + ... + X_months`` by exact regime-path enumeration.

    Conditional on the regimes the sum is Gaussian, so the law is a finite
    mixture. The first regime is drawn from the stationary law. Falls back to
    Monte Carlo when the number of regime paths exceeds ``max_paths``.
    """
    k = spec.n_regimes
    if k**months > max_paths:
        return _rsar1_annual_moments_mc(spec, months, mc_draws, seed)
    paths = _regime_paths(k, months)
    P = spec.transition
    pi = spec.stationary
    w = pi[paths[:, 0]] * np.prod(P[paths[:, :-1], paths[:, 1:]], axis=1)
    mu = np.array(spec.mu)[paths]
    phi = np.array(spec.phi)[paths]
    sig = np.array(spec.sigma)[paths]
    # conditional mean of the sum
    mean_k = np.empty_like(mu)
    prev = np.full(paths.shape[0], float(spec.x0))
    for t in range(months):
        prev = mu[:, t] + phi[:, t] * (prev - mu[:, t])
        mean_k[:, t] = prev
    mean = mean_k.sum(axis=1)
    # loading of eps_t on the sum: sigma_t * (1 + phi_{t+1} + phi_{t+1} phi_{t+2} + ...)
    load = np.zeros(paths.shape[0])
    var = np.zeros(paths.shape[0])
    for t in range(months - 1, -1, -1):
        load = 1.0 + (phi[:, t + 1] * load if t + 1 < months else 0.0)
        var += (sig[:, t] * load) ** 2
    m1 = float(np.dot(w, mean))
    dev = mean - m1
    m2c = float(np.dot(w, var + dev**2))
    m3c = float(np.dot(w, dev**3 + 3.0 * dev * var))
    return AnnualMoments(m1, m2c, m3c)


def _rsar1_annual_moments_mc(spec: RSAR1, months: int, draws: int, seed: int) -> AnnualMoments:
    from sigval.models import _rsar_from_noise

    rng = np.random.default_rng(seed)
    x, _ = _rsar_from_noise(spec, rng.standard_normal((draws, months)), rng.random((draws, months + 1)))
    return AnnualMoments.from_sample(x.sum(axis=1))


def fit_gamma_rw(target: AnnualMoments, months: int = 12) -> GammaRW:
    """Gamma random walk whose ``months``-step sum has the target three moments.

    The sum is ``months γ + Gamma(months α, β)``, with central moments
    ``months α β²`` and ``2 months α β³``.
    """
    if not target.m3c > 0:
        raise EstimationError(f"Gamma matching needs positive third central moment, got {target.m3c}")
    beta = target.m3c / (2.0 * target.m2c)
    alpha = target.m2c / (months * beta**2)
    gamma = (target.m1 - months * alpha * beta) / months
    return GammaRW(gamma_shift=float(gamma), alpha_shape=float(alpha), beta_scale=float(beta))


def gamma_rw_annual_moments(spec: GammaRW, months: int = 12) -> AnnualMoments:
    a = months * spec.alpha_shape
    b = spec.beta_scale
    return AnnualMoments(months * spec.gamma_shift + a * b, a * b**2, 2.0 * a * b**3)


# ---------------------------------------------------------------------------
# RSAR(1) maximum likelihood
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _hamilton_loglik(x, mu, phi, sigma, P, pi):
    k = mu.size
    xi = pi.copy()
    pred = np.empty(k)
    dens = np.empty(k)
    total = 0.0
    norm = 1.0 / np.sqrt(2.0 * np.pi)
    for t in range(1, x.size):
        for j in range(k):
            acc = 0.0
            for i in range(k):
                acc += xi[i] * P[i, j]
            pred[j] = acc
        s = 0.0
        for j in range(k):
            z = (x[t] - mu[j] - phi[j] * (x[t - 1] - mu[j])) / sigma[j]
            dens[j] = pred[j] * norm * np.exp(-0.5 * z * z) / sigma[j]
            s += dens[j]
        if not s > 0.0:
            return -np.inf
        total += np.log(s)
        for j in range(k):
            xi[j] = dens[j] / s
    return total


def rsar1_loglik(x, spec: RSAR1) -> float:
    """Log-likelihood of ``x_1..x_{T-1}`` given ``x_0`` with a stationary initial regime."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    return float(
        _hamilton_loglik(
            x,
            np.array(spec.mu),
            np.array(spec.phi),
            np.array(spec.sigma),
            spec.transition,
            spec.stationary,
        )
    )


SIGMA_FLOOR = 0.25  # lower bound on regime volatilities, in units of the sample sd


@numba.njit(cache=True)
def _unpack(theta, k, floor):
    mu = theta[:k].copy()
    phi = np.tanh(theta[k : 2 * k])
    sigma = floor + np.exp(theta[2 * k : 3 * k])
    P = np.empty((k, k))
    for i in range(k):
        # row i: logits of the moves to j != i, the "stay" logit fixed at 0
        m = 0.0
        for j in range(k - 1):
            m = max(m, theta[3 * k + i * (k - 1) + j])
        total = np.exp(-m)
        c = 0
        for j in range(k):
            if j != i:
                P[i, j] = np.exp(theta[3 * k + i * (k - 1) + c] - m)
                total += P[i, j]
                c += 1
        P[i, i] = np.exp(-m)
        for j in range(k):
            P[i, j] /= total
    return mu, phi, sigma, P


@numba.njit(cache=True)
def _stationary(P):
    k = P.shape[0]
    a = P.T - np.eye(k)
    a[k - 1, :] = 1.0
    b = np.zeros(k)
    b[k - 1] = 1.0
    return np.linalg.solve(a, b)


@numba.njit(cache=True)
def _neg_loglik(theta, x, k, floor):
    mu, phi, sigma, P = _unpack(theta, k, floor)
    for i in range(k):
        if not P[i, i] > 0.0 or not np.isfinite(sigma[i]):
            return 1e12
    pi = _stationary(P)
    for i in range(k):
        if not (pi[i] >= 0.0 and np.isfinite(pi[i])):
            return 1e12
    ll = _hamilton_loglik(x, mu, phi, sigma, P, pi)
    if not np.isfinite(ll):
        return 1e12
    return -ll


@dataclass(frozen=True)
class RSARFit:
    spec: RSAR1
    loglik: float
    n_starts: int
    n_converged: int
    degenerate: bool


def fit_rsar1_mle(
    x, k: int = 2, n_starts: int = 20, seed: int = 0, x0: float = 0.0, maxiter: int = 20_000
) -> RSARFit:
    """Hamilton-filter MLE by Nelder-Mead with random multi-starts.

    Autoregressive coefficients pass through ``tanh``, volatilities are
    ``floor + exp(.)`` and transition rows a multinomial logit (the "stay"
    probability being the reference), so every iterate is feasible. The floor
    of ``SIGMA_FLOOR * sd(x)`` excludes the degenerate maxima in which one
    regime collapses onto repeated values (e.g. months with zero change).
    Regimes are returned sorted by ascending mean.
    """
    x = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    if x.size < 50:
        raise InvalidArgumentError(f"need at least 50 observations, got {x.size}")
    if k < 2:
        raise InvalidArgumentError("RSAR(1) fitting needs k >= 2 regimes")
    rng = np.random.default_rng(seed)
    sd = float(np.std(x))
    floor = SIGMA_FLOOR * sd
    qs = np.quantile(x, np.linspace(0.25, 0.75, k))
    opts = {"maxiter": maxiter, "maxfev": 2 * maxiter, "xatol": 1e-10, "fatol": 1e-11, "adaptive": True}
    best = None
    converged = 0
    for _ in range(n_starts):
        mu0 = np.sort(qs + rng.normal(0.0, 0.25 * sd, k))
        phi0 = np.arctanh(rng.uniform(0.0, 0.8, k))
        sig0 = np.log(sd * rng.uniform(0.3, 1.2, k))
        stay = rng.uniform(0.8, 0.99, k)
        moves = np.log((1.0 - stay) / (k - 1) / stay)
        theta0 = np.concatenate([mu0, phi0, sig0, np.repeat(moves, k - 1)])
        res = optimize.minimize(_neg_loglik, theta0, args=(x, k, floor), method="Nelder-Mead", options=opts)
        # one restart from the optimum guards against simplex collapse
        res = optimize.minimize(_neg_loglik, res.x, args=(x, k, floor), method="Nelder-Mead", options=opts)
        if res.fun < 1e12:
            converged += int(res.success)
            if best is None or res.fun < best.fun:
                best = res
    if best is None:
        raise EstimationError(f"all {n_starts} optimiser starts failed on a series of length {x.size}")
    mu, phi, sigma, P = _unpack(best.x, k, floor)
    order = np.argsort(mu)
    P = P[np.ix_(order, order)]
    P = P / P.sum(axis=1, keepdims=True)
    spec = RSAR1(
        mu=tuple(mu[order]),
        phi=tuple(phi[order]),
        sigma=tuple(sigma[order]),
        P=tuple(map(tuple, P)),
        x0=float(x0),
    )
    degenerate = bool(np.isclose(mu[order][0], mu[order][-1], rtol=1e-3) or np.min(np.diag(P)) < 0.05)
    if degenerate:
        log.warning("RSAR(1) fit looks degenerate (regimes not separated)")
    return RSARFit(spec, float(-best.fun), n_starts, converged, degenerate)
