"""Signature-kernel MMD two-sample test with a Gram-spectrum null approximation.

The statistic is ``T = N * MMD²_{m,n}`` with the unbiased estimator of MMD².
Under the null hypothesis ``T`` is approximated in law by

    (1 / (ρ (1 - ρ))) * Σ_ℓ (ν_ℓ / N) (G_ℓ² - 1),   ρ = m / N,

where ``ν_ℓ`` are the leading eigenvalues of the centred Gram matrix of the
pooled sample and ``G_ℓ`` are i.i.d. standard normals.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from sigval.errors import InvalidArgumentError, NumericalError
from sigval.signature import PathSample, SignatureConfig, log_signature_levels, signature_levels
from sigval.tensor_algebra import TensorSeries, inner_product
from sigval.transforms import TransformSpec, apply_transform, rescale_features

DEFAULT_EIGENVALUES = 20
DEFAULT_DRAWS = 10_000
DEFAULT_LEVEL = 0.01


@dataclass(frozen=True)
class KernelConfig:
    signature_cfg: SignatureConfig = field(default_factory=SignatureConfig)
    transform: TransformSpec = field(default_factory=TransformSpec)
    from_level: int | None = None

    def __post_init__(self):
        expected = 2 if self.signature_cfg.drop_first_level else 1
        if self.from_level is None:
            object.__setattr__(self, "from_level", expected)
        elif self.from_level != expected:
            raise InvalidArgumentError(
                f"from_level={self.from_level} inconsistent with "
                f"drop_first_level={self.signature_cfg.drop_first_level}"
            )

    def to_dict(self) -> dict:
        return {
            "order": self.signature_cfg.order,
            "use_log_signature": self.signature_cfg.use_log_signature,
            "drop_first_level": self.signature_cfg.drop_first_level,
            "from_level": self.from_level,
            "representation": self.transform.representation.value,
            "lift": self.transform.lift.value,
            "rescale": self.transform.rescale,
        }


@dataclass(frozen=True)
class TestResult:
    mmd2: float
    statistic: float
    m: int
    n: int
    N: int
    eigenvalues: list[float]
    threshold: float
    p_value: float
    reject: bool
    level: float
    seed: int | None
    n_draws: int
    config: dict

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_value_resolution"] = 1.0 / (self.n_draws + 1)
        return d


# ---------------------------------------------------------------------------
# features and kernel
# ---------------------------------------------------------------------------


def signature_kernel(x: TensorSeries, y: TensorSeries, cfg: KernelConfig) -> float:
    if x.order != cfg.signature_cfg.order:
        raise InvalidArgumentError(f"series order {x.order} != configured order {cfg.signature_cfg.order}")
    return inner_product(x, y, cfg.from_level)


def signature_features(
    values: np.ndarray, order: int, log: bool = False, from_level: int = 1
) -> np.ndarray:
    """Flattened (log-)signature levels ``from_level..order`` of ``(B, L, d)`` nodes."""
    levels = (log_signature_levels if log else signature_levels)(values, order)
    return np.concatenate(levels[from_level:], axis=-1)


def truncate_features(features: np.ndarray, dim: int, order: int, new_order: int, from_level: int) -> np.ndarray:
    """Keep the columns of levels ``from_level..new_order`` of a feature matrix.

    Signature and log-signature levels below ``new_order`` do not depend on the
    truncation, so features computed once at the highest order serve all orders.
    """
    if new_order > order:
        raise InvalidArgumentError(f"cannot extend order {order} to {new_order}")
    width = sum(dim**n for n in range(from_level, new_order + 1))
    return features[..., :width]


def sample_features(sample: PathSample, cfg: KernelConfig) -> np.ndarray:
    lifted = apply_transform(sample, cfg.transform)
    return signature_features(
        lifted.values, cfg.signature_cfg.order, cfg.signature_cfg.use_log_signature, cfg.from_level
    )


def gram_matrix(fa: np.ndarray, fb: np.ndarray) -> np.ndarray:
    """Linear-kernel Gram matrix of the pooled features ``[fa; fb]``."""
    f = np.concatenate([fa, fb], axis=0)
    g = f @ f.T
    return 0.5 * (g + g.T)


# ---------------------------------------------------------------------------
# statistic and null distribution
# ---------------------------------------------------------------------------


def mmd2_unbiased(gram: np.ndarray, m: int, n: int) -> float:
    """Unbiased MMD² from the pooled Gram matrix, sample A first. May be negative."""
    gram = np.asarray(gram, dtype=np.float64)
    if m < 2 or n < 2:
        raise InvalidArgumentError(f"both samples need at least 2 paths, got m={m}, n={n}")
    if gram.shape != (m + n, m + n):
        raise InvalidArgumentError(f"gram has shape {gram.shape}, expected {(m + n, m + n)}")
    if not np.all(np.isfinite(gram)):
        raise InvalidArgumentError("gram contains non-finite entries")
    xx = gram[:m, :m]
    yy = gram[m:, m:]
    xy = gram[:m, m:]
    sxx = (xx.sum() - np.trace(xx)) / (m * (m - 1))
    syy = (yy.sum() - np.trace(yy)) / (n * (n - 1))
    return float(sxx + syy - 2.0 * xy.sum() / (m * n))


def centred_gram(gram: np.ndarray) -> np.ndarray:
    g = np.asarray(gram, dtype=np.float64)
    g = g - g.mean(axis=0, keepdims=True)
    g = g - g.mean(axis=1, keepdims=True)
    return 0.5 * (g + g.T)


def null_spectrum(gram: np.ndarray, top: int = DEFAULT_EIGENVALUES) -> np.ndarray:
    """Leading eigenvalues of ``H A H`` in decreasing order."""
    c = centred_gram(gram)
    try:
        eig = np.linalg.eigvalsh(c)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition of the {c.shape[0]}x{c.shape[0]} centred Gram failed: {exc}") from exc
    return eig[::-1][:top].copy()


def null_draws(
    eigenvalues, m: int, n: int, draws: int = DEFAULT_DRAWS, rng: np.random.Generator | int | None = None
) -> np.ndarray:
    """Draws from the spectral approximation of the null law of ``N * MMD²``."""
    nu = np.asarray(eigenvalues, dtype=np.float64).reshape(-1)
    if nu.size == 0:
        raise InvalidArgumentError("need at least one eigenvalue")
    if m < 1 or n < 1:
        raise InvalidArgumentError("sample sizes must be positive")
    rng = np.random.default_rng(rng)
    big_n = m + n
    rho = m / big_n
    g = rng.standard_normal((draws, nu.size))
    return ((g**2 - 1.0) @ (nu / big_n)) / (rho * (1.0 - rho))


def threshold_from_draws(draws: np.ndarray, level: float) -> float:
    return float(np.quantile(draws, 1.0 - level))


def p_value_from_draws(statistic: float, draws: np.ndarray) -> float:
    """``(1 + #{draws >= T}) / (1 + #draws)``."""
    return float((1 + np.count_nonzero(draws >= statistic)) / (1 + draws.size))


@dataclass(frozen=True)
class NullApproximation:
    """Eigenvalues and null draws reused across repeated tests of one configuration."""

    eigenvalues: np.ndarray
    draws: np.ndarray
    m: int
    n: int

    def threshold(self, level: float) -> float:
        return threshold_from_draws(self.draws, level)


def null_from_gram(gram, m, n, top=DEFAULT_EIGENVALUES, draws=DEFAULT_DRAWS, rng=None) -> NullApproximation:
    nu = null_spectrum(gram, top)
    return NullApproximation(nu, null_draws(nu, m, n, draws, rng), m, n)


def test_features(
    fa: np.ndarray,
    fb: np.ndarray,
    level: float = DEFAULT_LEVEL,
    rng=None,
    *,
    rescale: bool = False,
    null: NullApproximation | None = None,
    top: int = DEFAULT_EIGENVALUES,
    draws: int = DEFAULT_DRAWS,
    seed: int | None = None,
    config: dict | None = None,
) -> TestResult:
    """Run the test on precomputed feature matrices.

    If ``null`` is given its eigenvalues and draws are reused; otherwise they
    are computed from the pooled Gram matrix of this very pair.
    """
    if not 0.0 < level < 1.0:
        raise InvalidArgumentError(f"level must be in (0, 1), got {level}")
    if rescale:
        fa, fb = rescale_features(fa, fb)
    m, n = fa.shape[0], fb.shape[0]
    gram = gram_matrix(fa, fb)
    mmd2 = mmd2_unbiased(gram, m, n)
    if null is None:
        null = null_from_gram(gram, m, n, top, draws, rng)
    stat = (m + n) * mmd2
    thr = null.threshold(level)
    return TestResult(
        mmd2=mmd2,
        statistic=stat,
        m=m,
        n=n,
        N=m + n,
        eigenvalues=[float(v) for v in null.eigenvalues],
        threshold=thr,
        p_value=p_value_from_draws(stat, null.draws),
        reject=bool(stat > thr),
        level=level,
        seed=seed,
        n_draws=int(null.draws.size),
        config=dict(config or {}),
    )


test_features.__test__ = False


def two_sample_test(
    sample_a: PathSample,
    sample_b: PathSample,
    cfg: KernelConfig,
    level: float = DEFAULT_LEVEL,
    rng: np.random.Generator | int | None = None,
    *,
    top: int = DEFAULT_EIGENVALUES,
    draws: int = DEFAULT_DRAWS,
) -> TestResult:
    """Signature-kernel MMD test of ``sample_a`` against ``sample_b``."""
    if len(sample_a) < 2 or len(sample_b) < 2:
        raise InvalidArgumentError(f"both samples need at least 2 paths, got {len(sample_a)}, {len(sample_b)}")
    if sample_a.dim != sample_b.dim:
        raise InvalidArgumentError(f"sample dimensions differ: {sample_a.dim} vs {sample_b.dim}")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    fa = sample_features(sample_a, cfg)
    fb = sample_features(sample_b, cfg)
    return test_features(
        fa,
        fb,
        level,
        np.random.default_rng(rng),
        rescale=cfg.transform.rescale,
        top=top,
        draws=draws,
        seed=None if seed is None else int(seed),
        config=cfg.to_dict(),
    )


two_sample_test.__test__ = False


def ks_two_sample(xs, ys) -> float:
    """Asymptotic two-sample Kolmogorov-Smirnov p-value."""
    xs = np.asarray(xs, dtype=np.float64).reshape(-1)
    ys = np.asarray(ys, dtype=np.float64).reshape(-1)
    if xs.size == 0 or ys.size == 0:
        raise InvalidArgumentError("both KS samples must be non-empty")
    return float(stats.ks_2samp(xs, ys, method="asymp").pvalue)
