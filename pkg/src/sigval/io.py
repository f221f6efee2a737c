"""CSV formats for path samples and dated series, and the bundled snapshots.

Path samples use a long format preceded by a grid comment::

    # grid: T=1.0,steps=12,dim=1
    path_id,time_index,dim,value
    0,0,0,0.0
    ...

Node times are ``linspace(0, T, steps + 1)``. Values are written with 17
significant digits so a write-read round trip is lossless.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from sigval.errors import DataError, InvalidArgumentError
from sigval.signature import PathSample

PATHS_HEADER = ["path_id", "time_index", "dim", "value"]
SERIES_HEADER = ["date", "value"]

BUNDLED = {
    "sp500_vol": "sp500_gk_rv.csv",
    "cpi": "cpi_u_nsa.csv",
}


@dataclass(frozen=True)
class Series:
    dates: np.ndarray  # datetime64[D]
    values: np.ndarray

    def __len__(self) -> int:
        return self.values.size


def bundled_path(name: str) -> Path:
    """Filesystem path of a bundled snapshot (``sp500_vol`` or ``cpi``)."""
    try:
        fname = BUNDLED[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown bundled dataset {name!r}; choose from {sorted(BUNDLED)}") from None
    return Path(str(resources.files("sigval") / "data" / fname))


def resolve_data(spec: str) -> Path:
    """A path on disk, or ``bundled:<name>`` for a vendored snapshot."""
    if spec.startswith("bundled:"):
        return bundled_path(spec.split(":", 1)[1])
    return Path(spec)


# ---------------------------------------------------------------------------
# series
# ---------------------------------------------------------------------------


def read_series_csv(path: str | Path) -> Series:
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    dates, values = [], []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != SERIES_HEADER:
            raise DataError(f"{path}: expected header 'date,value', got {header}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise DataError(f"{path}: expected 2 fields, got {len(row)}", line=lineno)
            try:
                d = np.datetime64(row[0].strip(), "D")
            except ValueError:
                raise DataError(f"{path}: bad ISO-8601 date {row[0]!r}", line=lineno) from None
            try:
                v = float(row[1])
            except ValueError:
                raise DataError(f"{path}: bad value {row[1]!r}", line=lineno) from None
            if not np.isfinite(v):
                raise DataError(f"{path}: non-finite value {row[1]!r}", line=lineno)
            if dates and d <= dates[-1]:
                raise DataError(f"{path}: dates not strictly increasing at {row[0]}", line=lineno)
            dates.append(d)
            values.append(v)
    return Series(np.array(dates, dtype="datetime64[D]"), np.array(values, dtype=np.float64))


def write_series_csv(series: Series, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("date,value\n")
        for d, v in zip(series.dates, series.values):
            fh.write(f"{d},{v:.17g}\n")


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


def _grid_of(sample: PathSample) -> tuple[float, int]:
    t = sample.times
    steps = t.size - 1
    horizon = float(t[-1])
    if t[0] != 0.0 or not np.allclose(t, np.linspace(0.0, horizon, steps + 1), rtol=0, atol=1e-12):
        raise InvalidArgumentError("only samples on a uniform grid starting at 0 can be written")
    return horizon, steps


def write_paths_csv(sample: PathSample, path: str | Path) -> None:
    horizon, steps = _grid_of(sample)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# grid: T={horizon!r},steps={steps},dim={sample.dim}\n")
        fh.write(",".join(PATHS_HEADER) + "\n")
        b, n, d = sample.values.shape
        for i in range(b):
            for k in range(n):
                for c in range(d):
                    fh.write(f"{i},{k},{c},{sample.values[i, k, c]:.17g}\n")


def _parse_grid(line: str, path: Path) -> dict[str, str]:
    body = line[1:].strip()
    if not body.startswith("grid:"):
        raise DataError(f"{path}: first line must be '# grid: T=...,steps=...'", line=1)
    out = {}
    for part in body[len("grid:"):].split(","):
        if "=" not in part:
            raise DataError(f"{path}: malformed grid entry {part!r}", line=1)
        k, v = (s.strip() for s in part.split("=", 1))
        out[k] = v
    if "T" not in out or "steps" not in out:
        raise DataError(f"{path}: grid comment needs T and steps", line=1)
    return out


def read_paths_csv(path: str | Path) -> PathSample:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    if not lines:
        raise DataError(f"{path}: empty file", line=1)
    grid = _parse_grid(lines[0], path)
    try:
        horizon = float(grid["T"])
        steps = int(grid["steps"])
        dim_decl = int(grid["dim"]) if "dim" in grid else None
    except ValueError:
        raise DataError(f"{path}: non-numeric grid entries", line=1) from None
    if len(lines) < 2 or [h.strip() for h in lines[1].split(",")] != PATHS_HEADER:
        raise DataError(f"{path}: expected header {','.join(PATHS_HEADER)}", line=2)
    rows = []
    for lineno, raw in enumerate(lines[2:], start=3):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 4:
            raise DataError(f"{path}: expected 4 fields, got {len(parts)}", line=lineno)
        try:
            i, k, c = int(parts[0]), int(parts[1]), int(parts[2])
            v = float(parts[3])
        except ValueError:
            raise DataError(f"{path}: malformed row {raw!r}", line=lineno) from None
        if i < 0 or c < 0 or not 0 <= k <= steps:
            raise DataError(f"{path}: index out of range in {raw!r}", line=lineno)
        if not np.isfinite(v):
            raise DataError(f"{path}: non-finite value", line=lineno)
        rows.append((i, k, c, v, lineno))
    times = np.linspace(0.0, horizon, steps + 1)
    if not rows:
        return PathSample(times, np.zeros((0, steps + 1, dim_decl or 1)))
    n_paths = max(r[0] for r in rows) + 1
    dim = max(r[2] for r in rows) + 1
    if dim_decl is not None and dim != dim_decl:
        raise DataError(f"{path}: grid declares dim={dim_decl} but rows use {dim}", line=1)
    values = np.full((n_paths, steps + 1, dim), np.nan)
    for i, k, c, v, lineno in rows:
        if not np.isnan(values[i, k, c]):
            raise DataError(f"{path}: duplicate entry for path {i}, node {k}, dim {c}", line=lineno)
        values[i, k, c] = v
    if np.isnan(values).any():
        i, k, c = np.argwhere(np.isnan(values))[0]
        raise DataError(f"{path}: missing value for path {i}, node {k}, dim {c}")
    return PathSample(times, values)
