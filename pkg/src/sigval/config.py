"""Flat ``key = value`` configuration files with dotted namespaces.

Example::

    # fBm H=0.1 against H=0.2
    model_a.kind = fbm
    model_a.hurst = 0.1
    model_b.kind = fbm
    model_b.hurst = 0.2
    study.m = 10,20,50
    rsar.P = 0.95,0.05;0.1,0.9

Lists are comma-separated, matrices use ``;`` between rows. Blank lines and
lines starting with ``#`` are ignored. Keys are case-sensitive and unique.
"""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path

from sigval.errors import DataError, InvalidArgumentError
from sigval.models import BSD, MODEL_KINDS, RSAR1, Joint2D, RoughHeston

_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}

# fields stored as vectors or matrices, per model; everything else is a scalar
_VECTOR_FIELDS = {RSAR1: {"mu", "phi", "sigma"}}
_MATRIX_FIELDS = {RSAR1: {"P"}, BSD: {"vol_knots"}}


def parse_config(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{source}: expected 'key = value', got {raw!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise DataError(f"{source}: empty key", line=lineno)
        if key in out:
            raise DataError(f"{source}: duplicate key {key!r}", line=lineno)
        out[key] = value
    return out


def load_config(path: str | Path) -> dict[str, str]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read config {p}: {exc}") from exc
    return parse_config(text, str(p))


def apply_overrides(cfg: dict[str, str], overrides: list[str]) -> dict[str, str]:
    """``key=value`` overrides from the command line, applied last."""
    out = dict(cfg)
    for item in overrides or []:
        if "=" not in item:
            raise InvalidArgumentError(f"override must look like key=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        out[k] = v
    return out


# typed accessors ------------------------------------------------------------


def as_str(value: str, key: str = "?") -> str:
    return value.strip()


def as_float(value: str, key: str = "?") -> float:
    try:
        return float(value)
    except ValueError:
        raise InvalidArgumentError(f"{key}: expected a number, got {value!r}") from None


def as_int(value: str, key: str = "?") -> int:
    try:
        return int(value)
    except ValueError:
        raise InvalidArgumentError(f"{key}: expected an integer, got {value!r}") from None


def as_bool(value: str, key: str = "?") -> bool:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise InvalidArgumentError(f"{key}: expected a boolean, got {value!r}")


def as_float_list(value: str, key: str = "?") -> list[float]:
    return [as_float(v, key) for v in value.split(",") if v.strip()]


def as_int_list(value: str, key: str = "?") -> list[int]:
    return [as_int(v, key) for v in value.split(",") if v.strip()]


def as_matrix(value: str, key: str = "?") -> list[list[float]]:
    return [as_float_list(row, key) for row in value.split(";") if row.strip()]


def get(cfg: dict[str, str], key: str, conv=as_str, default=None):
    if key not in cfg:
        if default is None:
            raise InvalidArgumentError(f"missing required config key {key!r}")
        return default
    return conv(cfg[key], key)


def section(cfg: dict[str, str], prefix: str) -> dict[str, str]:
    """Sub-mapping of keys under ``prefix.`` with the prefix stripped."""
    p = prefix + "."
    return {k[len(p):]: v for k, v in cfg.items() if k.startswith(p)}


# model specs ----------------------------------------------------------------


def model_from_config(cfg: dict[str, str], prefix: str):
    """Build a model spec from the keys under ``prefix``; ``prefix.kind`` selects the type."""
    sub = section(cfg, prefix)
    kind = sub.get("kind")
    if kind is None:
        raise InvalidArgumentError(f"missing {prefix}.kind (one of {', '.join(sorted(MODEL_KINDS))})")
    cls = MODEL_KINDS.get(kind)
    if cls is None:
        raise InvalidArgumentError(f"unknown model kind {kind!r} for {prefix}")
    if cls is Joint2D:
        return Joint2D(
            rough=_build(RoughHeston, section(sub, "rough"), f"{prefix}.rough"),
            rsar1=_build(RSAR1, section(sub, "rsar1"), f"{prefix}.rsar1"),
            corr=as_float(sub.get("corr", "0"), f"{prefix}.corr"),
        )
    return _build(cls, sub, prefix)


def _build(cls, sub: dict[str, str], prefix: str):
    kwargs = {}
    names = {f.name for f in fields(cls)}
    for key, value in sub.items():
        if key == "kind":
            continue
        if key not in names:
            raise InvalidArgumentError(f"unknown key {prefix}.{key} for model {cls.kind}")
        full = f"{prefix}.{key}"
        if key in _VECTOR_FIELDS.get(cls, ()):
            kwargs[key] = tuple(as_float_list(value, full))
        elif key in _MATRIX_FIELDS.get(cls, ()):
            kwargs[key] = tuple(tuple(r) for r in as_matrix(value, full))
        elif value.lower() == "none":
            kwargs[key] = None
        else:
            kwargs[key] = as_float(value, full)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise InvalidArgumentError(f"{prefix}: {exc}") from None


def _fmt(v) -> str:
    if isinstance(v, (tuple, list)):
        if v and isinstance(v[0], (tuple, list)):
            return ";".join(",".join(repr(float(x)) for x in row) for row in v)
        return ",".join(repr(float(x)) for x in v)
    if v is None:
        return "none"
    return repr(float(v))


def model_to_config(spec, prefix: str) -> list[str]:
    """Inverse of :func:`model_from_config`."""
    lines = [f"{prefix}.kind = {spec.kind}"]
    if isinstance(spec, Joint2D):
        lines += model_to_config(spec.rough, f"{prefix}.rough")[1:]
        lines += model_to_config(spec.rsar1, f"{prefix}.rsar1")[1:]
        lines.append(f"{prefix}.corr = {_fmt(spec.corr)}")
        return lines
    for f in fields(spec):
        lines.append(f"{prefix}.{f.name} = {_fmt(getattr(spec, f.name))}")
    return lines

