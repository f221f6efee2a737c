"""Truncated tensor algebra T^R(R^d) with dense per-level storage.

Level ``n`` of a series is a flat array of ``d**n`` coefficients indexed by
multi-indices in lexicographic order, which is exactly C-order flattening of a
``(d,) * n`` tensor. All level-wise kernels below accept arrays with arbitrary
leading batch axes, so the same code serves single series and whole samples.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Sequence

import numpy as np

from sigval.errors import InvalidArgumentError

Levels = list[np.ndarray]

# Level 0 is carried as a trailing axis of length 1 so that scalar-times-level
# products broadcast without special cases.


# ---------------------------------------------------------------------------
# batched level kernels
# ---------------------------------------------------------------------------


def outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Flattened tensor product of two batched levels ``(..., p)``, ``(..., q)``."""
    out = a[..., :, None] * b[..., None, :]
    return out.reshape(out.shape[:-2] + (a.shape[-1] * b.shape[-1],))


def mul_levels(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> Levels:
    """Truncated product ``a ⊗ b`` of two batched level lists of equal length."""
    order = len(a) - 1
    out = []
    for n in range(order + 1):
        acc = a[0] * b[n]
        for k in range(1, n):
            acc = acc + outer(a[k], b[n - k])
        if n:
            acc = acc + a[n] * b[0]
        out.append(acc)
    return out


def exp_levels(x: Sequence[np.ndarray]) -> Levels:
    """Truncated ``exp`` of a batched series whose level 0 is zero."""
    order = len(x) - 1
    one = [np.ones_like(x[0])] + [np.zeros_like(lv) for lv in x[1:]]
    result = [lv.copy() for lv in one]
    power = one
    for k in range(1, order + 1):
        power = mul_levels(power, x)
        for n in range(order + 1):
            result[n] = result[n] + power[n] / factorial(k)
    return result


def log_levels(x: Sequence[np.ndarray]) -> Levels:
    """Truncated ``log`` of a batched series whose level 0 is one."""
    order = len(x) - 1
    y = [np.zeros_like(x[0])] + [lv for lv in x[1:]]
    result = [np.zeros_like(lv) for lv in x]
    power = [np.ones_like(x[0])] + [np.zeros_like(lv) for lv in x[1:]]
    for k in range(1, order + 1):
        power = mul_levels(power, y)
        coef = (-1.0) ** (k - 1) / k
        for n in range(order + 1):
            result[n] = result[n] + coef * power[n]
    return result


def exp_increment_levels(v: np.ndarray, order: int) -> Levels:
    """``exp`` of a pure level-1 element, via ``v^{⊗n} / n!`` directly.

    ``v`` has shape ``(..., d)``.
    """
    power = np.ones(v.shape[:-1] + (1,))
    levels = [power]
    for n in range(1, order + 1):
        power = outer(power, v) / n
        levels.append(power)
    return levels


def mul_exp_increment(s: Sequence[np.ndarray], v: np.ndarray) -> Levels:
    """Right-multiply batched series ``s`` by ``exp(v)`` for increments ``v``.

    Horner form: level ``n`` of ``s ⊗ exp(v)`` is
    ``(((s_0 v/n + s_1) v/(n-1) + s_2) ... ) v/1 + s_n``.
    """
    order = len(s) - 1
    out = [s[0]]
    for n in range(1, order + 1):
        acc = s[0] * v / n
        for k in range(1, n):
            acc = outer(acc + s[k], v) / (n - k)
        out.append(acc + s[n])
    return out


# ---------------------------------------------------------------------------
# TensorSeries value type
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TensorSeries:
    """An element of the tensor algebra over ``R^dim`` truncated at ``order``."""

    dim: int
    order: int
    levels: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidArgumentError(f"dim must be positive, got {self.dim}")
        if self.order < 0:
            raise InvalidArgumentError(f"order must be non-negative, got {self.order}")
        if len(self.levels) != self.order + 1:
            raise InvalidArgumentError(
                f"expected {self.order + 1} levels, got {len(self.levels)}"
            )
        frozen = []
        for n, lv in enumerate(self.levels):
            arr = np.array(lv, dtype=np.float64).reshape(-1)
            if arr.size != self.dim**n:
                raise InvalidArgumentError(
                    f"level {n} must have {self.dim ** n} entries, got {arr.size}"
                )
            if not np.all(np.isfinite(arr)):
                raise InvalidArgumentError(f"level {n} contains non-finite entries")
            arr.setflags(write=False)
            frozen.append(arr)
        object.__setattr__(self, "levels", tuple(frozen))

    # constructors -----------------------------------------------------------

    @classmethod
    def zero(cls, dim: int, order: int) -> TensorSeries:
        return cls(dim, order, tuple(np.zeros(dim**n) for n in range(order + 1)))

    @classmethod
    def unit(cls, dim: int, order: int) -> TensorSeries:
        levels = [np.zeros(dim**n) for n in range(order + 1)]
        levels[0][0] = 1.0
        return cls(dim, order, tuple(levels))

    @classmethod
    def from_level1(cls, vector, order: int, scalar: float = 0.0) -> TensorSeries:
        """Series with given level-1 vector and scalar part, zero elsewhere."""
        v = np.asarray(vector, dtype=np.float64).reshape(-1)
        d = v.size
        levels = [np.array([scalar])] + [v] + [np.zeros(d**n) for n in range(2, order + 1)]
        return cls(d, order, tuple(levels[: order + 1]))

    # views --------------------------------------------------------------------

    def level(self, n: int) -> np.ndarray:
        """Level ``n`` reshaped to a ``(dim,) * n`` tensor."""
        return self.levels[n].reshape((self.dim,) * n)

    def flat(self, from_level: int = 0) -> np.ndarray:
        """Concatenation of the levels ``from_level..order``."""
        parts = self.levels[from_level:]
        return np.concatenate(parts) if parts else np.zeros(0)

    def allclose(self, other: TensorSeries, atol: float = 1e-12) -> bool:
        _check_compatible(self, other)
        return all(np.allclose(a, b, rtol=0.0, atol=atol) for a, b in zip(self.levels, other.levels))

    def __repr__(self) -> str:
        return f"TensorSeries(dim={self.dim}, order={self.order}, level1={self.levels[1] if self.order else ()})"


def _check_compatible(a: TensorSeries, b: TensorSeries) -> None:
    if a.dim != b.dim or a.order != b.order:
        raise InvalidArgumentError(
            f"incompatible series: (dim={a.dim}, order={a.order}) vs (dim={b.dim}, order={b.order})"
        )


def tensor_mul(a: TensorSeries, b: TensorSeries) -> TensorSeries:
    """Truncated tensor product ``a ⊗ b``."""
    _check_compatible(a, b)
    levels = mul_levels(a.levels, b.levels)
    return TensorSeries(a.dim, a.order, tuple(levels))


def tensor_exp(t: TensorSeries) -> TensorSeries:
    """Truncated exponential ``Σ t^{⊗n}/n!``; requires a zero scalar part."""
    if t.levels[0][0] != 0.0:
        raise InvalidArgumentError(f"tensor_exp needs level 0 == 0, got {t.levels[0][0]}")
    levels = exp_levels([lv.copy() for lv in t.levels])
    return TensorSeries(t.dim, t.order, tuple(levels))


def tensor_log(t: TensorSeries) -> TensorSeries:
    """Truncated logarithm ``Σ (-1)^{n-1}/n (t-1)^{⊗n}``; requires scalar part 1."""
    if t.levels[0][0] != 1.0:
        raise InvalidArgumentError(f"tensor_log needs level 0 == 1, got {t.levels[0][0]}")
    levels = log_levels([lv.copy() for lv in t.levels])
    levels[0] = np.zeros(1)
    return TensorSeries(t.dim, t.order, tuple(levels))


def inner_product(a: TensorSeries, b: TensorSeries, from_level: int = 0) -> float:
    """Sum of level-wise Euclidean inner products from ``from_level`` upwards."""
    _check_compatible(a, b)
    if not 0 <= from_level <= a.order + 1:
        raise InvalidArgumentError(f"from_level {from_level} outside 0..{a.order}")
    return float(sum(np.dot(x, y) for x, y in zip(a.levels[from_level:], b.levels[from_level:])))


def dilate(t: TensorSeries, lam: float) -> TensorSeries:
    """Multiply level ``n`` by ``lam**n``."""
    levels = tuple(lv * lam**n for n, lv in enumerate(t.levels))
    return TensorSeries(t.dim, t.order, levels)
