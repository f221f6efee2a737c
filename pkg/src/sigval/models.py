"""Seedable simulators for the stochastic models used in the power studies.

Every simulator is a deterministic function of ``(spec, grid)``. Path ``i`` of
a sample draws all of its randomness from its own generator, derived from the
master seed by the counter scheme in :func:`path_generator`, so a path does
not depend on how many other paths are simulated alongside it.

Models sharing a noise layout consume their draws identically; in particular
classic and rough Heston with the same seed use the same Gaussian variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from functools import lru_cache
from math import gamma as gamma_fn
from typing import Union

import numpy as np

from sigval.errors import InvalidArgumentError, NumericalError
from sigval.signature import PathSample


# ---------------------------------------------------------------------------
# grid and random streams
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimGrid:
    n_paths: int
    steps_per_year: int = 12
    horizon: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_paths < 1:
            raise InvalidArgumentError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.steps_per_year < 1:
            raise InvalidArgumentError(f"steps_per_year must be >= 1, got {self.steps_per_year}")
        if not self.horizon > 0:
            raise InvalidArgumentError(f"horizon must be positive, got {self.horizon}")
        if self.n_steps < 1:
            raise InvalidArgumentError("grid has no steps")
        if int(self.seed) < 0:
            raise InvalidArgumentError(f"seed must be non-negative, got {self.seed}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon * self.steps_per_year))

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)


def path_generator(seed: int, index: int) -> np.random.Generator:
    """Generator for path ``index`` of the sample with master ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


def _path_noise(grid: SimGrid, normals_per_step: int, n_uniforms: int = 0):
    """Per-path standard normals ``(B, n_steps, k)`` followed by uniforms ``(B, u)``."""
    z = np.empty((grid.n_paths, grid.n_steps, normals_per_step))
    u = np.empty((grid.n_paths, n_uniforms))
    for i in range(grid.n_paths):
        g = path_generator(grid.seed, i)
        z[i] = g.standard_normal((grid.n_steps, normals_per_step))
        if n_uniforms:
            u[i] = g.random(n_uniforms)
    return z, u


# ---------------------------------------------------------------------------
# model definitions
# ---------------------------------------------------------------------------


def _positive(name, value):
    if not value > 0:
        raise InvalidArgumentError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class FBM:
    hurst: float
    kind = "fbm"

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise InvalidArgumentError(f"hurst must be in (0, 1), got {self.hurst}")


@dataclass(frozen=True)
class BSD:
    """Black-Scholes dynamics with piecewise-constant volatility.

    ``vol_knots`` lists ``(breakpoint, value)`` pairs; the volatility equals
    ``value`` from its breakpoint up to the next one. The first breakpoint is 0.
    """

    mu: float = 0.05
    vol_knots: tuple = ((0.0, 0.2),)
    s0: float = 1.0
    kind = "bsd"

    def __post_init__(self):
        knots = tuple((float(b), float(v)) for b, v in self.vol_knots)
        if not knots or knots[0][0] != 0.0:
            raise InvalidArgumentError("vol_knots must start at breakpoint 0")
        if any(b2 <= b1 for (b1, _), (b2, _) in zip(knots, knots[1:])):
            raise InvalidArgumentError("vol_knots breakpoints must be increasing")
        if any(v < 0 for _, v in knots):
            raise InvalidArgumentError("volatilities must be non-negative")
        _positive("s0", self.s0)
        object.__setattr__(self, "vol_knots", knots)

    def vol_at(self, t: np.ndarray) -> np.ndarray:
        b = np.array([k[0] for k in self.vol_knots])
        v = np.array([k[1] for k in self.vol_knots])
        return v[np.searchsorted(b, t, side="right") - 1]


@dataclass(frozen=True)
class BSDAutocorr:
    """BSd whose monthly Gaussian shocks have lag-1 correlation ``rho``.

    The volatility is ``gamma1`` on the first half of the horizon and
    ``gamma2`` on the second.
    """

    muC: float
    gamma1: float
    gamma2: float
    rho: float
    s0: float = 1.0
    kind = "bsd_autocorr"

    def __post_init__(self):
        if not -0.5 <= self.rho <= 0.5:
            raise InvalidArgumentError(f"rho must be in [-0.5, 0.5], got {self.rho}")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise InvalidArgumentError("volatilities must be non-negative")
        _positive("s0", self.s0)


@dataclass(frozen=True)
class Heston:
    s0: float = 1.0
    v0: float = 0.05
    theta: float = 0.05
    lam: float = 0.3
    sigma: float = 0.3
    rho: float = -0.7
    kind = "heston"

    def __post_init__(self):
        _positive("s0", self.s0)
        if self.v0 < 0:
            raise InvalidArgumentError(f"v0 must be non-negative, got {self.v0}")
        _positive("sigma", self.sigma)
        if not -1.0 <= self.rho <= 1.0:
            raise InvalidArgumentError(f"rho must be in [-1, 1], got {self.rho}")


@dataclass(frozen=True)
class RoughHeston(Heston):
    hurst: float = 0.1
    kind = "rough_heston"

    def __post_init__(self):
        super().__post_init__()
        if not 0.0 < self.hurst <= 0.5:
            raise InvalidArgumentError(f"hurst must be in (0, 0.5], got {self.hurst}")


@dataclass(frozen=True)
class RSAR1:
    """Regime-switching AR(1) for monthly log-returns.

    ``X_k = mu[s] + phi[s] (X_{k-1} - mu[s]) + sigma[s] eps_k`` with ``s`` the
    regime at step ``k``. ``P[i][j]`` is the probability of moving from ``i`` to ``j``.
    """

    mu: tuple
    phi: tuple
    sigma: tuple
    P: tuple
    x0: float = 0.0
    kind = "rsar1"

    def __post_init__(self):
        mu = tuple(float(v) for v in self.mu)
        phi = tuple(float(v) for v in self.phi)
        sigma = tuple(float(v) for v in self.sigma)
        P = tuple(tuple(float(v) for v in row) for row in self.P)
        k = len(mu)
        if k < 1 or len(phi) != k or len(sigma) != k or len(P) != k or any(len(r) != k for r in P):
            raise InvalidArgumentError("mu, phi, sigma and P must describe the same number of regimes")
        if any(s <= 0 for s in sigma):
            raise InvalidArgumentError("regime volatilities must be positive")
        pm = np.array(P)
        if np.any(pm < 0) or not np.allclose(pm.sum(axis=1), 1.0, atol=1e-10):
            raise InvalidArgumentError("P must be row-stochastic with non-negative entries")
        for name, value in (("mu", mu), ("phi", phi), ("sigma", sigma), ("P", P)):
            object.__setattr__(self, name, value)
        stationary_distribution(pm)

    @property
    def n_regimes(self) -> int:
        return len(self.mu)

    @property
    def transition(self) -> np.ndarray:
        return np.array(self.P)

    @property
    def stationary(self) -> np.ndarray:
        return stationary_distribution(self.transition)


@dataclass(frozen=True)
class GammaRW:
    """Random walk with i.i.d. log-returns ``gamma_shift + Gamma(alpha_shape, beta_scale)``."""

    gamma_shift: float
    alpha_shape: float
    beta_scale: float
    kind = "gamma_rw"

    def __post_init__(self):
        _positive("alpha_shape", self.alpha_shape)
        _positive("beta_scale", self.beta_scale)


@dataclass(frozen=True)
class OU:
    theta: float
    alpha: float
    sigma: float
    y0: float | None = None
    kind = "ou"

    def __post_init__(self):
        _positive("alpha", self.alpha)
        if self.sigma < 0:
            raise InvalidArgumentError(f"sigma must be non-negative, got {self.sigma}")

    @property
    def start(self) -> float:
        return self.theta if self.y0 is None else self.y0


@dataclass(frozen=True)
class FOU:
    hurst: float
    theta: float
    alpha: float
    sigma: float
    y0: float | None = None
    kind = "fou"

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise InvalidArgumentError(f"hurst must be in (0, 1), got {self.hurst}")
        if self.alpha < 0 or self.sigma < 0:
            raise InvalidArgumentError("alpha and sigma must be non-negative")

    @property
    def start(self) -> float:
        return self.theta if self.y0 is None else self.y0


@dataclass(frozen=True)
class Joint2D:
    """Rough-Heston price and an RSAR(1) index whose price noise and AR noise correlate."""

    rough: RoughHeston = field(default_factory=RoughHeston)
    rsar1: RSAR1 = None
    corr: float = 0.0
    kind = "joint2d"

    def __post_init__(self):
        if self.rsar1 is None:
            raise InvalidArgumentError("joint2d needs an rsar1 component")
        if not -1.0 <= self.corr <= 1.0:
            raise InvalidArgumentError(f"corr must be in [-1, 1], got {self.corr}")
        _joint_cholesky(self.rough.rho, self.corr)


ModelSpec = Union[FBM, BSD, BSDAutocorr, Heston, RoughHeston, RSAR1, GammaRW, OU, FOU, Joint2D]
MODEL_KINDS = {cls.kind: cls for cls in (FBM, BSD, BSDAutocorr, Heston, RoughHeston, RSAR1, GammaRW, OU, FOU, Joint2D)}


def spec_to_dict(spec) -> dict:
    """Plain-data view of a spec, with its ``kind`` tag."""
    out = {"kind": spec.kind}
    for f in fields(spec):
        v = getattr(spec, f.name)
        if hasattr(v, "kind"):
            v = spec_to_dict(v)
        elif isinstance(v, tuple):
            v = [list(r) if isinstance(r, tuple) else r for r in v]
        out[f.name] = v
    return out


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Unique stationary law of a row-stochastic matrix."""
    P = np.asarray(P, dtype=np.float64)
    k = P.shape[0]
    a = np.vstack([P.T - np.eye(k), np.ones((1, k))])
    b = np.r_[np.zeros(k), 1.0]
    if np.linalg.matrix_rank(a) < k:
        raise InvalidArgumentError("Markov chain has no unique stationary distribution")
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    if np.linalg.norm(a @ pi - b) > 1e-9:
        raise InvalidArgumentError("Markov chain has no unique stationary distribution")
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def toeplitz_eigenvalues(rho: float, n: int) -> np.ndarray:
    """Eigenvalues ``1 + 2 rho cos(k pi / (n + 1))`` of the tridiagonal correlation matrix."""
    k = np.arange(1, n + 1)
    return 1.0 + 2.0 * rho * np.cos(k * np.pi / (n + 1))


def tridiagonal_correlation(rho: float, n: int) -> np.ndarray:
    return np.eye(n) + rho * (np.eye(n, k=1) + np.eye(n, k=-1))


def fbm_covariance(hurst: float, times: np.ndarray) -> np.ndarray:
    s = np.asarray(times, dtype=np.float64)[:, None]
    t = s.T
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(s) ** h2 + np.abs(t) ** h2 - np.abs(s - t) ** h2)


@lru_cache(maxsize=64)
def _fbm_cholesky(hurst: float, n_steps: int, horizon: float) -> np.ndarray:
    t = np.linspace(0.0, horizon, n_steps + 1)[1:]
    try:
        return np.linalg.cholesky(fbm_covariance(hurst, t))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"fBm covariance not positive definite (H={hurst}, n={n_steps})") from exc


def _fbm_from_normals(hurst: float, grid: SimGrid, z: np.ndarray) -> np.ndarray:
    """fBm levels ``(B, n_steps + 1)`` starting at 0 from normals ``(B, n_steps)``."""
    chol = _fbm_cholesky(float(hurst), grid.n_steps, float(grid.horizon))
    levels = z @ chol.T
    return np.concatenate([np.zeros((z.shape[0], 1)), levels], axis=1)


def _sample(grid: SimGrid, values: np.ndarray) -> PathSample:
    return PathSample(grid.times, values)


def bsd_autocorr_matched(mu: float, sigma: float, rho: float, n_steps: int = 12, s0: float = 1.0) -> BSDAutocorr:
    """Autocorrelated BSd whose annual log-return law equals the constant-vol BSd's.

    With ``gamma1 = sigma / sqrt(2)`` on the first half, ``gamma2`` solves the
    variance equation of the correlated Gaussian sum and ``muC`` fixes the mean.
    """
    if n_steps % 2:
        raise InvalidArgumentError("the two volatility regimes need an even number of steps")
    if np.min(toeplitz_eigenvalues(rho, n_steps)) <= 0:
        raise InvalidArgumentError(f"rho={rho} makes the shock covariance singular")
    dt = 1.0 / n_steps
    h = n_steps // 2
    g1 = sigma / np.sqrt(2.0)
    # dt * [h g1² + h g2² + 2 rho ((h-1) g1² + g1 g2 + (h-1) g2²)] = sigma²
    a = h + 2 * rho * (h - 1)
    coeffs = [dt * a, dt * 2 * rho * g1, dt * a * g1**2 - sigma**2]
    roots = np.roots(coeffs)
    roots = roots[np.isreal(roots)].real
    roots = roots[roots >= 0]
    if roots.size == 0:
        raise NumericalError("no non-negative gamma2 matches the target variance")
    g2 = float(roots.max())
    mu_c = mu - 0.5 * sigma**2 + 0.5 * dt * h * (g1**2 + g2**2)
    return BSDAutocorr(muC=mu_c, gamma1=g1, gamma2=g2, rho=rho, s0=s0)


# ---------------------------------------------------------------------------
# simulators
# ---------------------------------------------------------------------------


def simulate_fbm(spec: FBM | float, grid: SimGrid) -> PathSample:
    hurst = spec.hurst if isinstance(spec, FBM) else float(FBM(spec).hurst)
    z, _ = _path_noise(grid, 1)
    return _sample(grid, _fbm_from_normals(hurst, grid, z[..., 0]))


def _lognormal_paths(s0, drift, vol, dt, z):
    incr = (drift - 0.5 * vol**2) * dt + vol * np.sqrt(dt) * z
    logs = np.log(s0) + np.concatenate([np.zeros((z.shape[0], 1)), np.cumsum(incr, axis=1)], axis=1)
    return np.exp(logs)


def simulate_bsd(spec: BSD, grid: SimGrid) -> PathSample:
    z, _ = _path_noise(grid, 1)
    vol = spec.vol_at(grid.times[:-1])
    return _sample(grid, _lognormal_paths(spec.s0, spec.mu, vol, grid.dt, z[..., 0]))


def simulate_bsd_autocorr(spec: BSDAutocorr, grid: SimGrid) -> PathSample:
    n = grid.n_steps
    lam = toeplitz_eigenvalues(spec.rho, n)
    if np.min(lam) <= 0:
        raise InvalidArgumentError(
            f"rho={spec.rho} violates 1 + 2 rho cos(k pi/(N+1)) > 0 for N={n} (min {lam.min():.4g})"
        )
    chol = np.linalg.cholesky(tridiagonal_correlation(spec.rho, n))
    z, _ = _path_noise(grid, 1)
    g = z[..., 0] @ chol.T
    t = grid.times[:-1]
    vol = np.where(t < 0.5 * grid.horizon, spec.gamma1, spec.gamma2)
    return _sample(grid, _lognormal_paths(spec.s0, spec.muC, vol, grid.dt, g))


def _heston_price(spec: Heston, v_left: np.ndarray, db: np.ndarray, dperp: np.ndarray, dt: float) -> np.ndarray:
    dw = spec.rho * db + np.sqrt(1.0 - spec.rho**2) * dperp
    incr = -0.5 * v_left * dt + np.sqrt(v_left) * dw
    logs = np.log(spec.s0) + np.concatenate([np.zeros((db.shape[0], 1)), np.cumsum(incr, axis=1)], axis=1)
    return np.exp(logs)


def heston_variance(spec: Heston, dt: float, db: np.ndarray) -> np.ndarray:
    """Variance paths by the E(0) scheme from Brownian increments ``(B, n)``.

    ``V' = ((1 - λΔ/2) √V + σ ΔB / (2 (1 - λΔ/2)))² + (θ - σ²/4) Δ``.
    """
    if spec.theta < spec.sigma**2 / 4:
        raise InvalidArgumentError(
            f"E(0) needs theta >= sigma^2/4, got theta={spec.theta}, sigma={spec.sigma}"
        )
    c = 1.0 - 0.5 * spec.lam * dt
    if c <= 0:
        raise InvalidArgumentError(f"step too coarse for lambda={spec.lam}: 1 - lambda*dt/2 <= 0")
    v = np.empty((db.shape[0], db.shape[1] + 1))
    v[:, 0] = spec.v0
    shift = (spec.theta - 0.25 * spec.sigma**2) * dt
    for k in range(db.shape[1]):
        v[:, k + 1] = (c * np.sqrt(v[:, k]) + spec.sigma * db[:, k] / (2.0 * c)) ** 2 + shift
    return v


def simulate_heston(spec: Heston, grid: SimGrid, return_variance: bool = False):
    z, _ = _path_noise(grid, 2)
    sq = np.sqrt(grid.dt)
    db, dperp = z[..., 0] * sq, z[..., 1] * sq
    v = heston_variance(spec, grid.dt, db)
    s = _heston_price(spec, v[:, :-1], db, dperp, grid.dt)
    sample = _sample(grid, s)
    return (sample, v) if return_variance else sample


def volterra_weights(hurst: float, dt: float, n_steps: int) -> np.ndarray:
    """``w[i]`` weights the increment ``i`` steps before the current one."""
    a = hurst + 0.5
    i = np.arange(n_steps, dtype=np.float64)
    return dt ** (a - 1.0) * ((i + 1.0) ** a - i**a) / gamma_fn(a + 1.0)


def rough_heston_variance(spec: RoughHeston, dt: float, db: np.ndarray) -> np.ndarray:
    """Volterra-Euler variance with exact kernel-integrated weights; may dip below 0."""
    b, n = db.shape
    w = volterra_weights(spec.hurst, dt, n)
    v = np.empty((b, n + 1))
    v[:, 0] = spec.v0
    incr = np.empty((b, n))
    for k in range(n):
        vp = np.maximum(v[:, k], 0.0)
        incr[:, k] = (spec.theta - spec.lam * vp) * dt + spec.sigma * np.sqrt(vp) * db[:, k]
        v[:, k + 1] = spec.v0 + incr[:, : k + 1] @ w[k::-1]
    return v


def simulate_rough_heston(spec: RoughHeston, grid: SimGrid, return_variance: bool = False):
    z, _ = _path_noise(grid, 2)
    sq = np.sqrt(grid.dt)
    db, dperp = z[..., 0] * sq, z[..., 1] * sq
    v = rough_heston_variance(spec, grid.dt, db)
    s = _heston_price(spec, np.maximum(v[:, :-1], 0.0), db, dperp, grid.dt)
    sample = _sample(grid, s)
    return (sample, v) if return_variance else sample


@dataclass(frozen=True)
class RSARPaths:
    index: PathSample  # cumulative log-returns, starting at 0
    returns: np.ndarray  # (B, n_steps) monthly log-returns X_1..X_n
    regimes: np.ndarray  # (B, n_steps + 1) regimes s_0..s_n


def _rsar_from_noise(spec: RSAR1, eps: np.ndarray, u: np.ndarray):
    b, n = eps.shape
    pi = spec.stationary
    cdf = np.cumsum(spec.transition, axis=1)
    cdf[:, -1] = 1.0
    s = np.empty((b, n + 1), dtype=np.int64)
    s[:, 0] = np.minimum(np.searchsorted(np.cumsum(pi), u[:, 0], side="right"), spec.n_regimes - 1)
    for k in range(n):
        s[:, k + 1] = (u[:, k + 1][:, None] >= cdf[s[:, k]]).sum(axis=1)
    mu = np.array(spec.mu)
    phi = np.array(spec.phi)
    sig = np.array(spec.sigma)
    x = np.empty((b, n))
    prev = np.full(b, float(spec.x0))
    for k in range(n):
        r = s[:, k + 1]
        prev = mu[r] + phi[r] * (prev - mu[r]) + sig[r] * eps[:, k]
        x[:, k] = prev
    return x, s


def simulate_rsar1_paths(spec: RSAR1, grid: SimGrid) -> RSARPaths:
    z, u = _path_noise(grid, 1, grid.n_steps + 1)
    x, s = _rsar_from_noise(spec, z[..., 0], u)
    index = np.concatenate([np.zeros((grid.n_paths, 1)), np.cumsum(x, axis=1)], axis=1)
    return RSARPaths(_sample(grid, index), x, s)


def simulate_rsar1(spec: RSAR1, grid: SimGrid) -> PathSample:
    return simulate_rsar1_paths(spec, grid).index


def simulate_gamma_rw(spec: GammaRW, grid: SimGrid) -> PathSample:
    x = np.empty((grid.n_paths, grid.n_steps))
    for i in range(grid.n_paths):
        x[i] = path_generator(grid.seed, i).gamma(spec.alpha_shape, spec.beta_scale, grid.n_steps)
    x += spec.gamma_shift
    return _sample(grid, np.concatenate([np.zeros((grid.n_paths, 1)), np.cumsum(x, axis=1)], axis=1))


def simulate_ou(spec: OU, grid: SimGrid) -> PathSample:
    """Exact Gaussian transition of the Ornstein-Uhlenbeck process."""
    z, _ = _path_noise(grid, 1)
    a = np.exp(-spec.alpha * grid.dt)
    sd = spec.sigma * np.sqrt((1.0 - a**2) / (2.0 * spec.alpha))
    y = np.empty((grid.n_paths, grid.n_steps + 1))
    y[:, 0] = spec.start
    for k in range(grid.n_steps):
        y[:, k + 1] = spec.theta + (y[:, k] - spec.theta) * a + sd * z[:, k, 0]
    return _sample(grid, y)


def simulate_fou(spec: FOU, grid: SimGrid) -> PathSample:
    """Euler scheme driven by exact fBm increments."""
    z, _ = _path_noise(grid, 1)
    dbh = np.diff(_fbm_from_normals(spec.hurst, grid, z[..., 0]), axis=1)
    y = np.empty((grid.n_paths, grid.n_steps + 1))
    y[:, 0] = spec.start
    for k in range(grid.n_steps):
        y[:, k + 1] = y[:, k] + spec.alpha * (spec.theta - y[:, k]) * grid.dt + spec.sigma * dbh[:, k]
    return _sample(grid, y)


def _joint_cholesky(rho: float, corr: float) -> np.ndarray:
    """Cholesky factor of the correlation of ``(W, B, eps)``."""
    c = np.array([[1.0, rho, corr], [rho, 1.0, 0.0], [corr, 0.0, 1.0]])
    eig = np.linalg.eigvalsh(c)
    if eig.min() < -1e-12:
        raise InvalidArgumentError(
            f"correlation of (W, B, eps) with rho={rho}, corr={corr} is not positive semi-definite"
        )
    if eig.min() < 1e-14:
        # semi-definite boundary: factor via the eigendecomposition
        w, q = np.linalg.eigh(c)
        return q * np.sqrt(np.clip(w, 0.0, None))
    return np.linalg.cholesky(c)


def simulate_joint2d(spec: Joint2D, grid: SimGrid) -> PathSample:
    """Two coordinates: rough-Heston price ``S`` and index ``I = exp(Σ X)``.

    Per step the shocks ``(W, B, eps)`` are jointly Gaussian with unit
    variances, ``Corr(W, B) = rough.rho``, ``Corr(W, eps) = corr`` and
    ``Corr(B, eps) = 0``. Each coordinate's marginal law does not depend on ``corr``.
    The AR index is monthly, so the grid must have 12 steps per year.
    """
    if grid.steps_per_year != 12:
        raise InvalidArgumentError(
            f"joint2d shocks are monthly; use steps_per_year=12, got {grid.steps_per_year}"
        )
    z, u = _path_noise(grid, 3, grid.n_steps + 1)
    shocks = z @ _joint_cholesky(spec.rough.rho, spec.corr).T
    sq = np.sqrt(grid.dt)
    dw, db, eps = shocks[..., 0] * sq, shocks[..., 1] * sq, shocks[..., 2]
    v = np.maximum(rough_heston_variance(spec.rough, grid.dt, db)[:, :-1], 0.0)
    incr = -0.5 * v * grid.dt + np.sqrt(v) * dw
    zero = np.zeros((grid.n_paths, 1))
    s = spec.rough.s0 * np.exp(np.concatenate([zero, np.cumsum(incr, axis=1)], axis=1))
    x, _ = _rsar_from_noise(spec.rsar1, eps, u)
    idx = np.exp(np.concatenate([zero, np.cumsum(x, axis=1)], axis=1))
    return _sample(grid, np.stack([s, idx], axis=-1))


_SIMULATORS = {
    FBM: simulate_fbm,
    BSD: simulate_bsd,
    BSDAutocorr: simulate_bsd_autocorr,
    Heston: simulate_heston,
    RoughHeston: simulate_rough_heston,
    RSAR1: simulate_rsar1,
    GammaRW: simulate_gamma_rw,
    OU: simulate_ou,
    FOU: simulate_fou,
    Joint2D: simulate_joint2d,
}


def simulate(spec: ModelSpec, grid: SimGrid) -> PathSample:
    """Dispatch on the spec type."""
    try:
        fn = _SIMULATORS[type(spec)]
    except KeyError:
        raise InvalidArgumentError(f"no simulator for {type(spec).__name__}") from None
    return fn(spec, grid)


def subsample(sample: PathSample, every: int) -> PathSample:
    """Keep every ``every``-th node (including the first and, if aligned, the last)."""
    if (sample.times.size - 1) % every:
        raise InvalidArgumentError(f"{sample.times.size - 1} steps are not a multiple of {every}")
    return PathSample(sample.times[::every], sample.values[:, ::every])
