"""Path representations, lifts and the cross-sample signature rescaling.

A *representation* maps raw observations to the sequence that is studied
(log-path, log-returns, monthly realized volatility). A *lift* embeds that
sequence into a multi-dimensional path whose signature carries the relevant
statistics: the lead-lag lift encodes quadratic variation in its Lévy area,
the cumulative lead-lag lift encodes empirical moments.

The ``*_values`` functions are batched over leading axes and are what the
test harness uses; the single-path wrappers return :class:`PiecewisePath`.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from sigval.errors import DomainError, InvalidArgumentError
from sigval.signature import PathSample, PiecewisePath
from sigval.tensor_algebra import TensorSeries

DAYS_PER_MONTH = 21
MONTHS_PER_YEAR = 12


class Representation(str, Enum):
    ORIGINAL = "original"
    LOG_PATH = "log_path"
    LOG_RETURNS = "log_returns"
    REALIZED_VOLATILITY = "realized_volatility"


class Lift(str, Enum):
    NONE = "none"
    LEAD_LAG = "lead_lag"
    TIME = "time"
    TIME_LEAD_LAG = "time_lead_lag"
    CUMULATIVE_LEAD_LAG = "cumulative_lead_lag"


@dataclass(frozen=True)
class TransformSpec:
    representation: Representation = Representation.ORIGINAL
    lift: Lift = Lift.LEAD_LAG
    rescale: bool = False

    def __post_init__(self):
        object.__setattr__(self, "representation", Representation(self.representation))
        object.__setattr__(self, "lift", Lift(self.lift))


def _as_obs(obs) -> np.ndarray:
    x = np.asarray(obs, dtype=np.float64)
    if x.shape[-1] < 2:
        raise InvalidArgumentError(f"need at least 2 observations, got {x.shape[-1]}")
    return x


def _default_times(n: int, horizon: float = 1.0) -> np.ndarray:
    return np.linspace(0.0, horizon, n)


# ---------------------------------------------------------------------------
# lifts (batched over leading axes; observations on the last axis)
# ---------------------------------------------------------------------------


def lead_lag_values(x: np.ndarray) -> np.ndarray:
    """Lead-lag nodes ``(..., 2N+1, 2)`` of observations ``(..., N+1)``.

    Node ``2j`` is ``(X_j, X_j)`` and node ``2j+1`` is ``(X_{j+1}, X_j)``.
    """
    x = _as_obs(x)
    n = x.shape[-1]
    lead = np.repeat(x, 2, axis=-1)[..., 1:]
    lag = np.repeat(x, 2, axis=-1)[..., :-1]
    out = np.stack([lead, lag], axis=-1)
    assert out.shape[-2] == 2 * n - 1
    return out


def lead_lag_times(times: np.ndarray) -> np.ndarray:
    """Pseudo-times of the lead-lag nodes: originals interleaved with midpoints."""
    t = np.asarray(times, dtype=np.float64)
    out = np.empty(2 * t.size - 1)
    out[0::2] = t
    out[1::2] = 0.5 * (t[:-1] + t[1:])
    return out


def time_lead_lag_values(x: np.ndarray, times: np.ndarray | None = None) -> np.ndarray:
    x = _as_obs(x)
    t = _default_times(x.shape[-1]) if times is None else np.asarray(times, dtype=np.float64)
    tt = np.broadcast_to(lead_lag_times(t), x.shape[:-1] + (2 * x.shape[-1] - 1,))
    return np.concatenate([tt[..., None], lead_lag_values(x)], axis=-1)


def time_augment_values(x: np.ndarray, times: np.ndarray | None = None) -> np.ndarray:
    x = _as_obs(x)
    t = _default_times(x.shape[-1]) if times is None else np.asarray(times, dtype=np.float64)
    return np.stack([np.broadcast_to(t, x.shape), x], axis=-1)


def cumulative_values(x: np.ndarray) -> np.ndarray:
    """Partial sums with a leading zero: ``(0, X_0, X_0 + X_1, ...)``."""
    x = np.asarray(x, dtype=np.float64)
    zero = np.zeros(x.shape[:-1] + (1,))
    return np.concatenate([zero, np.cumsum(x, axis=-1)], axis=-1)


def cumulative_lead_lag_values(x: np.ndarray) -> np.ndarray:
    return lead_lag_values(cumulative_values(_as_obs(x)))


# single-path wrappers -------------------------------------------------------


def lead_lag(obs, times=None) -> PiecewisePath:
    x = _as_obs(obs).reshape(-1)
    t = np.arange(x.size, dtype=float) if times is None else np.asarray(times, dtype=float)
    return PiecewisePath(lead_lag_times(t), lead_lag_values(x))


def time_augment(obs, times=None) -> PiecewisePath:
    x = _as_obs(obs).reshape(-1)
    t = _default_times(x.size) if times is None else np.asarray(times, dtype=float)
    return PiecewisePath(t, time_augment_values(x, t))


def time_lead_lag(obs, times=None) -> PiecewisePath:
    x = _as_obs(obs).reshape(-1)
    t = _default_times(x.size) if times is None else np.asarray(times, dtype=float)
    return PiecewisePath(lead_lag_times(t), time_lead_lag_values(x, t))


def cumulative_lead_lag(obs) -> PiecewisePath:
    x = _as_obs(obs).reshape(-1)
    nodes = cumulative_lead_lag_values(x)
    return PiecewisePath(np.arange(nodes.shape[0], dtype=float) / 2.0, nodes)


# ---------------------------------------------------------------------------
# representations
# ---------------------------------------------------------------------------


def _check_positive(x: np.ndarray) -> None:
    bad = np.argwhere(~(x > 0))
    if bad.size:
        idx = tuple(int(i) for i in bad[0])
        where = idx[-1] if len(idx) == 1 else idx
        raise DomainError(f"observation at index {where} is not positive: {x[tuple(bad[0])]!r}")


def log_path(obs) -> np.ndarray:
    x = np.asarray(obs, dtype=np.float64)
    _check_positive(x)
    return np.log(x)


def log_returns(obs) -> np.ndarray:
    lx = log_path(_as_obs(obs))
    return np.diff(lx, axis=-1)


def realized_volatility(daily_prices) -> np.ndarray:
    """Twelve monthly realized volatilities from 253 daily prices (21 days a month)."""
    s = np.asarray(daily_prices, dtype=np.float64)
    expected = MONTHS_PER_YEAR * DAYS_PER_MONTH + 1
    if s.shape[-1] != expected:
        raise InvalidArgumentError(f"realized_volatility needs {expected} daily prices, got {s.shape[-1]}")
    r = log_returns(s)
    r = r.reshape(r.shape[:-1] + (MONTHS_PER_YEAR, DAYS_PER_MONTH))
    return np.sqrt(np.sum(r**2, axis=-1))


# ---------------------------------------------------------------------------
# sample-level pipeline
# ---------------------------------------------------------------------------


def _represent(values: np.ndarray, times: np.ndarray, rep: Representation):
    """Apply a representation to ``(B, L)`` observations of one coordinate."""
    if rep is Representation.ORIGINAL:
        return times, values
    if rep is Representation.LOG_PATH:
        return times, log_path(values)
    if rep is Representation.LOG_RETURNS:
        return times[1:], log_returns(values)
    if rep is Representation.REALIZED_VOLATILITY:
        if values.shape[-1] != MONTHS_PER_YEAR * DAYS_PER_MONTH + 1:
            raise InvalidArgumentError(
                "realized_volatility needs daily paths with 253 nodes per year, "
                f"got {values.shape[-1]} nodes"
            )
        month_ends = times[DAYS_PER_MONTH::DAYS_PER_MONTH]
        return month_ends, realized_volatility(values)
    raise InvalidArgumentError(f"unknown representation {rep!r}")


def _lift(values: np.ndarray, times: np.ndarray, lift: Lift):
    """Lift ``(B, L)`` observations; returns node times and ``(B, L', k)`` nodes."""
    if lift is Lift.NONE:
        return times, values[..., None]
    if lift is Lift.LEAD_LAG:
        return lead_lag_times(times), lead_lag_values(values)
    if lift is Lift.TIME:
        return times, time_augment_values(values, times)
    if lift is Lift.TIME_LEAD_LAG:
        return lead_lag_times(times), time_lead_lag_values(values, times)
    if lift is Lift.CUMULATIVE_LEAD_LAG:
        n = values.shape[-1] + 1
        return np.arange(2 * n - 1, dtype=float) / 2.0, cumulative_lead_lag_values(values)
    raise InvalidArgumentError(f"unknown lift {lift!r}")


def apply_transform(sample: PathSample, spec: TransformSpec) -> PathSample:
    """Representation then lift, applied coordinatewise.

    Multi-dimensional inputs are lifted coordinate by coordinate and the results
    concatenated, so a 2-d lead-lag gives ``(lead_1, lag_1, lead_2, lag_2)``.
    For the time lifts the time coordinate is emitted once, first.
    """
    out_times = None
    blocks = []
    for c in range(sample.dim):
        t, v = _represent(sample.values[:, :, c], sample.times, spec.representation)
        t, nodes = _lift(v, t, spec.lift)
        if c > 0 and spec.lift in (Lift.TIME, Lift.TIME_LEAD_LAG):
            nodes = nodes[..., 1:]
        out_times = t
        blocks.append(nodes)
    return PathSample(out_times, np.concatenate(blocks, axis=-1))


# ---------------------------------------------------------------------------
# rescaling and historical splitting
# ---------------------------------------------------------------------------


def rescale_features(fa: np.ndarray, fb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Divide each feature column by its pooled max absolute value.

    Columns that vanish in both samples stay at zero.
    """
    fa = np.asarray(fa, dtype=np.float64)
    fb = np.asarray(fb, dtype=np.float64)
    if fa.ndim != 2 or fb.ndim != 2 or fa.shape[1] != fb.shape[1]:
        raise InvalidArgumentError(f"feature shapes {fa.shape} and {fb.shape} do not match")
    scale = np.maximum(np.abs(fa).max(axis=0, initial=0.0), np.abs(fb).max(axis=0, initial=0.0))
    safe = np.where(scale > 0, scale, 1.0)
    return fa / safe, fb / safe


def rescale_signatures(
    sample_a: list[TensorSeries], sample_b: list[TensorSeries]
) -> tuple[list[TensorSeries], list[TensorSeries]]:
    """Pooled per-coefficient max rescaling of two samples of series."""
    pooled = list(sample_a) + list(sample_b)
    if not pooled:
        return [], []
    dim, order = pooled[0].dim, pooled[0].order
    for s in pooled:
        if s.dim != dim or s.order != order:
            raise InvalidArgumentError("all series must share dim and order")

    def stack(series):
        return np.array([s.flat() for s in series]).reshape(len(series), -1)

    fa, fb = rescale_features(stack(sample_a), stack(sample_b))
    sizes = np.cumsum([dim**n for n in range(order + 1)])[:-1]

    def unstack(f):
        return [TensorSeries(dim, order, tuple(np.split(row, sizes))) for row in f]

    return unstack(fa), unstack(fb)


def n_year_paths(n_obs: int, months_per_path: int = MONTHS_PER_YEAR) -> int:
    """Number of complete paths of ``months_per_path + 1`` points sharing endpoints."""
    return (n_obs - 1) // months_per_path


def split_years(monthly_obs, months_per_path: int = MONTHS_PER_YEAR) -> PathSample:
    """Cut a monthly series into consecutive one-year paths sharing endpoints.

    Path ``i`` holds observations ``12 i, ..., 12 (i + 1)``; observations after
    the last complete path are dropped.
    """
    y = np.asarray(monthly_obs, dtype=np.float64).reshape(-1)
    m = n_year_paths(y.size, months_per_path)
    if m < 1:
        raise InvalidArgumentError(
            f"need at least {months_per_path + 1} observations, got {y.size}"
        )
    idx = months_per_path * np.arange(m)[:, None] + np.arange(months_per_path + 1)[None, :]
    times = np.linspace(0.0, 1.0, months_per_path + 1)
    return PathSample(times, y[idx][:, :, None])


def monthly_last(dates: np.ndarray, values) -> tuple[np.ndarray, np.ndarray]:
    """Keep the last observation of each calendar month.

    ``dates`` must be sorted ``datetime64`` values.
    """
    d = np.asarray(dates, dtype="datetime64[D]")
    v = np.asarray(values, dtype=np.float64)
    months = d.astype("datetime64[M]")
    last = np.r_[months[1:] != months[:-1], True]
    return d[last], v[last]


def rolling_annual_changes(monthly_obs, step: int = 1, months: int = MONTHS_PER_YEAR) -> np.ndarray:
    """Overlapping one-year changes ``y[k + 12] - y[k]`` for ``k = 0, step, 2 step, ...``."""
    y = np.asarray(monthly_obs, dtype=np.float64).reshape(-1)
    starts = np.arange(0, y.size - months, step)
    return y[starts + months] - y[starts]
