"""Truncated signatures of piecewise-linear paths.

Signatures are assembled segment by segment with Chen's identity,
``S(X) = exp(ΔX_0) ⊗ exp(ΔX_1) ⊗ ... ⊗ exp(ΔX_{n-1})``, which is exact for
linearly interpolated observations. :func:`signature_bruteforce` evaluates the
iterated integrals directly from Riemann sums and exists only as a test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from sigval.errors import InvalidArgumentError
from sigval.tensor_algebra import (
    Levels,
    TensorSeries,
    log_levels,
    mul_exp_increment,
    outer,
)

MAX_ORDER = 8


@dataclass(frozen=True, eq=False)
class PiecewisePath:
    """A ``d``-dimensional path given by its interpolation nodes."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] != times.size:
            raise InvalidArgumentError(
                f"values must have shape ({times.size}, d), got {values.shape}"
            )
        if times.size < 2:
            raise InvalidArgumentError(f"a path needs at least 2 nodes, got {times.size}")
        if np.any(np.diff(times) <= 0):
            raise InvalidArgumentError("path times must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise InvalidArgumentError("path contains non-finite coordinates")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.times.size

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)


@dataclass(frozen=True, eq=False)
class PathSample:
    """A sample of paths sharing dimension and node times.

    ``values`` has shape ``(n_paths, n_nodes, dim)``.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 2:
            values = values[:, :, None]
        if values.ndim != 3 or values.shape[1] != times.size:
            raise InvalidArgumentError(
                f"values must have shape (n_paths, {times.size}, d), got {values.shape}"
            )
        if times.size < 2 or np.any(np.diff(times) <= 0):
            raise InvalidArgumentError("sample times must be strictly increasing with >= 2 nodes")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_paths(cls, paths: Sequence[PiecewisePath]) -> PathSample:
        if not paths:
            raise InvalidArgumentError("cannot build a sample from zero paths")
        times = paths[0].times
        for p in paths[1:]:
            if p.times.shape != times.shape or not np.array_equal(p.times, times):
                raise InvalidArgumentError("all paths of a sample must share node times")
            if p.dim != paths[0].dim:
                raise InvalidArgumentError("all paths of a sample must share dimension")
        return cls(times, np.stack([p.values for p in paths]))

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, i: int) -> PiecewisePath:
        return PiecewisePath(self.times, self.values[i])

    def __iter__(self) -> Iterator[PiecewisePath]:
        return (self[i] for i in range(len(self)))


@dataclass(frozen=True)
class SignatureConfig:
    """Which signature features enter the kernel."""

    order: int = 2
    use_log_signature: bool = False
    drop_first_level: bool = True

    def __post_init__(self):
        if not 1 <= self.order <= MAX_ORDER:
            raise InvalidArgumentError(f"order must be in 1..{MAX_ORDER}, got {self.order}")


# ---------------------------------------------------------------------------
# signatures
# ---------------------------------------------------------------------------


def signature_levels(values: np.ndarray, order: int) -> Levels:
    """Batched signature levels of linearly interpolated node arrays.

    Args:
        values: node coordinates of shape ``(..., n_nodes, d)``.
        order: truncation order.

    Returns:
        List of ``order + 1`` arrays, level ``n`` of shape ``(..., d**n)``.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-2] < 2:
        raise InvalidArgumentError("a path needs at least 2 nodes")
    if order < 0:
        raise InvalidArgumentError(f"order must be non-negative, got {order}")
    batch = values.shape[:-2]
    d = values.shape[-1]
    levels: Levels = [np.ones(batch + (1,))] + [np.zeros(batch + (d**n,)) for n in range(1, order + 1)]
    incr = np.diff(values, axis=-2)
    for j in range(incr.shape[-2]):
        levels = mul_exp_increment(levels, incr[..., j, :])
    return levels


def log_signature_levels(values: np.ndarray, order: int) -> Levels:
    levels = log_levels(signature_levels(values, order))
    levels[0] = np.zeros_like(levels[0])
    return levels


def signature(path: PiecewisePath, order: int) -> TensorSeries:
    """Truncated signature of a piecewise-linear path."""
    if order < 1:
        raise InvalidArgumentError(f"order must be >= 1, got {order}")
    if not isinstance(path, PiecewisePath):
        path = PiecewisePath(np.arange(len(path), dtype=float), path)
    return TensorSeries(path.dim, order, tuple(signature_levels(path.values, order)))


def log_signature(path: PiecewisePath, order: int) -> TensorSeries:
    """Truncated log-signature, ``log(S(X))``."""
    if order < 1:
        raise InvalidArgumentError(f"order must be >= 1, got {order}")
    if not isinstance(path, PiecewisePath):
        path = PiecewisePath(np.arange(len(path), dtype=float), path)
    return TensorSeries(path.dim, order, tuple(log_signature_levels(path.values, order)))


def sample_signatures(sample: PathSample, order: int, log: bool = False) -> list[TensorSeries]:
    levels = (log_signature_levels if log else signature_levels)(sample.values, order)
    return [
        TensorSeries(sample.dim, order, tuple(lv[i] for lv in levels)) for i in range(len(sample))
    ]


def _strict_iterated_sums(values: np.ndarray, order: int, grid: int) -> Levels:
    """Strictly ordered left-point sums on a ``grid``-fold uniform refinement."""
    d = values.shape[1]
    steps = np.repeat(np.diff(values, axis=0) / grid, grid, axis=0)
    out: Levels = [np.ones(1)]
    # prefix[j] = sum over i1 < ... < i_{n} < j of dx_{i1} ⊗ ... ⊗ dx_{in}
    prefix = np.ones((steps.shape[0], 1))
    for _ in range(order):
        terms = outer(prefix, steps)
        total = terms.sum(axis=0)
        prefix = np.cumsum(terms, axis=0) - terms
        out.append(total)
    assert out[1].size == d
    return out


def signature_bruteforce(path: PiecewisePath, order: int, grid: int = 1000) -> TensorSeries:
    """Iterated integrals from nested Riemann sums (test oracle).

    The strictly ordered sum over a ``M``-fold refinement of a piecewise-linear
    path is a polynomial of degree ``order - 1`` in ``1/M``, so Richardson
    extrapolation over the refinements ``M, 2M, ..., 2^{order-1} M`` removes the
    discretisation error entirely.
    """
    if grid < 1000:
        raise InvalidArgumentError(f"grid must be >= 1000, got {grid}")
    if order < 1:
        raise InvalidArgumentError(f"order must be >= 1, got {order}")
    grids = [grid * 2**k for k in range(order)]
    tables = [_strict_iterated_sums(path.values, order, g) for g in grids]
    h = np.array([1.0 / g for g in grids])
    # Lagrange extrapolation to h = 0 of a polynomial through (h_k, value_k).
    weights = np.array(
        [np.prod([h[j] / (h[j] - h[k]) for j in range(len(h)) if j != k]) for k in range(len(h))]
    )
    levels = [sum(w * t[n] for w, t in zip(weights, tables)) for n in range(order + 1)]
    levels[0] = np.ones(1)
    return TensorSeries(path.dim, order, tuple(levels))


# ---------------------------------------------------------------------------
# path surgery used by invariance properties
# ---------------------------------------------------------------------------


def reparametrize(path: PiecewisePath, phi: Callable[[np.ndarray], np.ndarray] | np.ndarray) -> PiecewisePath:
    """Re-time the nodes of ``path`` through a non-decreasing surjection.

    ``phi`` is either a callable applied to the node times or an explicit array
    of new node times. Endpoints must be preserved. Nodes mapped onto the same
    time are merged when they coincide in space (a flat stretch of ``phi``).
    """
    new_times = np.asarray(phi(path.times) if callable(phi) else phi, dtype=np.float64)
    if new_times.shape != path.times.shape:
        raise InvalidArgumentError("remapped times must match the number of nodes")
    if not (np.isclose(new_times[0], path.times[0]) and np.isclose(new_times[-1], path.times[-1])):
        raise InvalidArgumentError("reparametrization must preserve the endpoints")
    gaps = np.diff(new_times)
    if np.any(gaps < 0):
        raise InvalidArgumentError("reparametrization must be non-decreasing")
    keep = np.ones(new_times.size, dtype=bool)
    for i in np.nonzero(gaps == 0)[0]:
        if not np.array_equal(path.values[i], path.values[i + 1]):
            raise InvalidArgumentError("a flat reparametrization cannot map a moving segment to one instant")
        keep[i + 1] = False
    return PiecewisePath(new_times[keep], path.values[keep])


def reverse(path: PiecewisePath) -> PiecewisePath:
    """The path run backwards over the same time interval."""
    t0, t1 = path.times[0], path.times[-1]
    return PiecewisePath((t0 + t1 - path.times)[::-1], path.values[::-1])


def translate(path: PiecewisePath, shift) -> PiecewisePath:
    return PiecewisePath(path.times, path.values + np.asarray(shift, dtype=np.float64))


def concatenate(first: PiecewisePath, second: PiecewisePath) -> PiecewisePath:
    """``first * second``: ``second`` translated to start where ``first`` ends."""
    if first.dim != second.dim:
        raise InvalidArgumentError("cannot concatenate paths of different dimension")
    shift = first.values[-1] - second.values[0]
    times = first.times[-1] + (second.times[1:] - second.times[0])
    return PiecewisePath(
        np.concatenate([first.times, times]),
        np.concatenate([first.values, second.values[1:] + shift]),
    )
