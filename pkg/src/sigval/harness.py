"""Power studies on synthetic models and validation pipelines on historical data.

A power study estimates, for each sample size ``m`` and truncation order, the
rejection rate of the test when sample A (size ``m``) comes from ``model_a``
and sample B (size ``n``) from ``model_b``, and the rejection rate when both
come from ``model_a``. The null threshold of each ``(m, order)`` cell is
computed once from an independent pair drawn from ``model_a`` and reused
across repetitions.

Seeds of every simulated sample are derived from ``(seed, m, repetition, role)``
so results do not depend on scheduling or thread count.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from sigval import calibration as cal
from sigval.errors import InvalidArgumentError, SigvalError
from sigval.io import Series
from sigval.mmd import (
    DEFAULT_DRAWS,
    DEFAULT_EIGENVALUES,
    DEFAULT_LEVEL,
    KernelConfig,
    NullApproximation,
    TestResult,
    gram_matrix,
    ks_two_sample,
    null_from_gram,
    signature_features,
    test_features,
    truncate_features,
)
from sigval.models import FOU, OU, RSAR1, GammaRW, SimGrid, simulate, spec_to_dict, subsample
from sigval.signature import PathSample, SignatureConfig
from sigval.transforms import (
    Lift,
    Representation,
    TransformSpec,
    apply_transform,
    monthly_last,
    rescale_features,
    rolling_annual_changes,
    split_years,
)

log = logging.getLogger(__name__)

# roles of the samples within one repetition
ROLE_A, ROLE_B, ROLE_A0, ROLE_B0 = 0, 1, 2, 3
ROLE_NULL_A, ROLE_NULL_B = 4, 5


def derive_seed(seed: int, *keys: int) -> int:
    """A 63-bit seed determined by ``seed`` and the integer ``keys``."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


# ---------------------------------------------------------------------------
# power studies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerStudyConfig:
    model_a: object
    model_b: object
    m_list: tuple = (10, 20, 30, 50, 100, 150)
    n: int = 1000
    orders: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    transform: TransformSpec = field(default_factory=TransformSpec)
    use_log_signature: bool = False
    drop_first_level: bool = True
    level: float = DEFAULT_LEVEL
    repetitions: int = 1000
    null_draws: int = DEFAULT_DRAWS
    top_eigenvalues: int = DEFAULT_EIGENVALUES
    seed: int = 0
    steps_per_year: int = 12
    horizon: float = 1.0
    subsample: int = 1
    threshold_per_rep: bool = False
    type_i: bool = True

    def __post_init__(self):
        m_list = tuple(int(m) for m in self.m_list)
        orders = tuple(sorted(int(o) for o in self.orders))
        if not m_list or min(m_list) < 2:
            raise InvalidArgumentError("every m must be >= 2")
        if self.n < max(m_list):
            raise InvalidArgumentError(f"n={self.n} must be >= max(m_list)={max(m_list)}")
        if self.repetitions < 1:
            raise InvalidArgumentError("repetitions must be >= 1")
        if not orders:
            raise InvalidArgumentError("need at least one truncation order")
        for o in orders:
            SignatureConfig(order=o)
        if self.drop_first_level and orders[0] < 2:
            raise InvalidArgumentError("order 1 leaves no features once level 1 is dropped")
        object.__setattr__(self, "m_list", m_list)
        object.__setattr__(self, "orders", orders)

    @property
    def from_level(self) -> int:
        return 2 if self.drop_first_level else 1

    def grid(self, n_paths: int, seed: int) -> SimGrid:
        return SimGrid(n_paths=n_paths, steps_per_year=self.steps_per_year, horizon=self.horizon, seed=seed)

    def to_dict(self) -> dict:
        return {
            "model_a": spec_to_dict(self.model_a),
            "model_b": spec_to_dict(self.model_b),
            "m_list": list(self.m_list),
            "n": self.n,
            "orders": list(self.orders),
            "representation": self.transform.representation.value,
            "lift": self.transform.lift.value,
            "rescale": self.transform.rescale,
            "use_log_signature": self.use_log_signature,
            "drop_first_level": self.drop_first_level,
            "level": self.level,
            "repetitions": self.repetitions,
            "null_draws": self.null_draws,
            "top_eigenvalues": self.top_eigenvalues,
            "seed": self.seed,
            "steps_per_year": self.steps_per_year,
            "horizon": self.horizon,
            "subsample": self.subsample,
            "threshold_per_rep": self.threshold_per_rep,
        }


@dataclass(frozen=True)
class PowerCell:
    m: int
    order: int
    power: float
    power_se: float
    type_i: float | None
    type_i_se: float | None
    threshold: float | None
    eigenvalues: list | None
    rejections: int
    type_i_rejections: int | None


@dataclass(frozen=True)
class PowerReport:
    config: dict
    cells: list
    wall_time: dict | None = None

    def cell(self, m: int, order: int) -> PowerCell:
        for c in self.cells:
            if c.m == m and c.order == order:
                return c
        raise KeyError((m, order))

    def power(self, m: int, order: int) -> float:
        return self.cell(m, order).power

    def to_dict(self) -> dict:
        d = {
            "config": self.config,
            "cells": [c.__dict__ for c in self.cells],
            # power against order for each m, ready for plotting
            "curves": {
                str(m): {"orders": [c.order for c in self.cells if c.m == m],
                         "power": [c.power for c in self.cells if c.m == m]}
                for m in dict.fromkeys(c.m for c in self.cells)
            },
        }
        if self.wall_time is not None:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _features(cfg: PowerStudyConfig, spec, n_paths: int, seed: int) -> np.ndarray:
    sample = simulate(spec, cfg.grid(n_paths, seed))
    if cfg.subsample > 1:
        sample = subsample(sample, cfg.subsample)
    lifted = apply_transform(sample, cfg.transform)
    return signature_features(lifted.values, max(cfg.orders), cfg.use_log_signature, cfg.from_level)


def _pair_features(cfg, fa, fb, dim, order):
    ta = truncate_features(fa, dim, max(cfg.orders), order, cfg.from_level)
    tb = truncate_features(fb, dim, max(cfg.orders), order, cfg.from_level)
    if cfg.transform.rescale:
        ta, tb = rescale_features(ta, tb)
    return ta, tb


def _lifted_dim(cfg: PowerStudyConfig) -> int:
    probe = simulate(cfg.model_a, cfg.grid(1, 0))
    if cfg.subsample > 1:
        probe = subsample(probe, cfg.subsample)
    return apply_transform(probe, cfg.transform).dim


def _null_for(cfg, fa, fb, dim, order, seed) -> NullApproximation:
    ta, tb = _pair_features(cfg, fa, fb, dim, order)
    return null_from_gram(
        gram_matrix(ta, tb), ta.shape[0], tb.shape[0], cfg.top_eigenvalues, cfg.null_draws,
        np.random.default_rng(seed),
    )


def _rejections(cfg, fa, fb, dim, nulls, seed) -> list[bool]:
    out = []
    for k, order in enumerate(cfg.orders):
        ta, tb = _pair_features(cfg, fa, fb, dim, order)
        null = None if nulls is None else nulls[k]
        res = test_features(
            ta, tb, cfg.level, np.random.default_rng(derive_seed(seed, order)), null=null,
            top=cfg.top_eigenvalues, draws=cfg.null_draws,
        )
        out.append(res.reject)
    return out


def run_power_study(cfg: PowerStudyConfig, threads: int = 1, timing: bool = False) -> PowerReport:
    """Estimate power and type I error for every ``(m, order)`` cell.

    ``timing`` adds per-``m`` wall times to the report; they are excluded by
    default so that reports are byte-for-byte reproducible.
    """
    dim = _lifted_dim(cfg)
    cells = []
    walls = {}
    try:
        _power_cells(cfg, dim, cells, walls, threads)
    except KeyboardInterrupt:
        # keep the completed cells; callers decide whether to write them
        log.warning("interrupted after %d cells", len(cells))
        return PowerReport({**cfg.to_dict(), "interrupted": True}, cells, walls if timing else None)
    return PowerReport(cfg.to_dict(), cells, walls if timing else None)


def _power_cells(cfg, dim, cells, walls, threads):
    for m in cfg.m_list:
        t0 = time.perf_counter()
        nulls = None
        if not cfg.threshold_per_rep:
            fa0 = _features(cfg, cfg.model_a, m, derive_seed(cfg.seed, m, 0, ROLE_NULL_A))
            fb0 = _features(cfg, cfg.model_a, cfg.n, derive_seed(cfg.seed, m, 0, ROLE_NULL_B))
            nulls = [_null_for(cfg, fa0, fb0, dim, o, derive_seed(cfg.seed, m, o, 99)) for o in cfg.orders]

        def one_rep(r, m=m, nulls=nulls):
            fa = _features(cfg, cfg.model_a, m, derive_seed(cfg.seed, m, r, ROLE_A))
            fb = _features(cfg, cfg.model_b, cfg.n, derive_seed(cfg.seed, m, r, ROLE_B))
            power = _rejections(cfg, fa, fb, dim, nulls, derive_seed(cfg.seed, m, r, 10))
            if not cfg.type_i:
                return power, None
            fa0 = _features(cfg, cfg.model_a, m, derive_seed(cfg.seed, m, r, ROLE_A0))
            fb0 = _features(cfg, cfg.model_a, cfg.n, derive_seed(cfg.seed, m, r, ROLE_B0))
            return power, _rejections(cfg, fa0, fb0, dim, nulls, derive_seed(cfg.seed, m, r, 11))

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(one_rep, range(cfg.repetitions)))
        else:
            results = [one_rep(r) for r in range(cfg.repetitions)]
        reps = cfg.repetitions
        for k, order in enumerate(cfg.orders):
            rej = sum(res[0][k] for res in results)
            p = rej / reps
            t1 = None if not cfg.type_i else sum(res[1][k] for res in results)
            q = None if t1 is None else t1 / reps
            cells.append(
                PowerCell(
                    m=m,
                    order=order,
                    power=p,
                    power_se=float(np.sqrt(p * (1 - p) / reps)),
                    type_i=q,
                    type_i_se=None if q is None else float(np.sqrt(q * (1 - q) / reps)),
                    threshold=None if nulls is None else nulls[k].threshold(cfg.level),
                    eigenvalues=None if nulls is None else [float(v) for v in nulls[k].eigenvalues],
                    rejections=int(rej),
                    type_i_rejections=None if t1 is None else int(t1),
                )
            )
        walls[str(m)] = time.perf_counter() - t0
        log.info("m=%d done in %.1fs", m, walls[str(m)])


# ---------------------------------------------------------------------------
# historical validation pipelines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineSpec:
    """How a historical series is turned into paths and what is simulated.

    ``kind`` is ``volatility`` (daily realized variances; the studied series is
    the daily log-volatility ``0.5 log(RV)``) or ``inflation`` (monthly index
    levels; the studied series is the log-index).
    """

    kind: str
    order: int
    use_log_signature: bool
    ks_step: int
    sim_steps_per_year: int
    sim_subsample: int

    @classmethod
    def volatility(cls) -> PipelineSpec:
        return cls("volatility", 4, False, 1, 252, 21)

    @classmethod
    def inflation(cls) -> PipelineSpec:
        return cls("inflation", 4, True, 3, 12, 1)

    @classmethod
    def named(cls, name: str) -> PipelineSpec:
        if name == "volatility":
            return cls.volatility()
        if name == "inflation":
            return cls.inflation()
        raise InvalidArgumentError(f"unknown pipeline {name!r} (volatility or inflation)")


VOL_MODELS = ("ou", "fou")
INFLATION_MODELS = ("grw", "rsar1")


@dataclass(frozen=True)
class Prepared:
    """Stage 1 output: the studied series and the historical path sample."""

    daily: np.ndarray | None
    monthly: np.ndarray
    monthly_dates: np.ndarray
    historical: PathSample


def prepare_series(series: Series, pipe: PipelineSpec) -> Prepared:
    if pipe.kind == "volatility":
        if np.any(series.values <= 0):
            raise InvalidArgumentError("realized variances must be positive")
        y = 0.5 * np.log(series.values)
        d, monthly = monthly_last(series.dates, y)
        return Prepared(y, monthly, d, split_years(monthly))
    if np.any(series.values <= 0):
        raise InvalidArgumentError("index levels must be positive")
    y = np.log(series.values)
    d, monthly = monthly_last(series.dates, y)
    return Prepared(None, monthly, d, split_years(monthly))


def calibrate_model(name: str, prep: Prepared, seed: int = 0):
    """Calibrate one of ``ou``, ``fou``, ``grw``, ``rsar1``; returns ``(spec, details)``."""
    if name == "ou":
        spec = cal.fit_ou_mle(_daily(prep))
        return spec, {}
    if name == "fou":
        h = cal.estimate_hurst(_daily(prep))
        return cal.fit_fou_moments(_daily(prep), h.hurst), {"hurst_fit": {"hurst": h.hurst, "slopes": list(h.slopes)}}
    if name == "grw":
        mom = cal.AnnualMoments.from_sample(rolling_annual_changes(prep.monthly, step=3))
        return cal.fit_gamma_rw(mom), {"annual_moments": mom.__dict__}
    if name == "rsar1":
        fit = cal.fit_rsar1_mle(np.diff(prep.monthly), seed=seed)
        return fit.spec, {"loglik": fit.loglik, "degenerate": fit.degenerate, "n_converged": fit.n_converged}
    raise InvalidArgumentError(f"unknown model {name!r}; choose from ou, fou, grw, rsar1")


def _daily(prep: Prepared) -> np.ndarray:
    if prep.daily is None:
        raise InvalidArgumentError("this model is calibrated on daily data")
    return prep.daily


def simulate_for_pipeline(spec, pipe: PipelineSpec, n_paths: int, seed: int) -> PathSample:
    if isinstance(spec, (OU, FOU)) and pipe.kind != "volatility":
        raise InvalidArgumentError("OU/fOU models belong to the volatility pipeline")
    if isinstance(spec, (GammaRW, RSAR1)) and pipe.kind != "inflation":
        raise InvalidArgumentError("GRW/RSAR(1) models belong to the inflation pipeline")
    grid = SimGrid(n_paths=n_paths, steps_per_year=pipe.sim_steps_per_year, seed=seed)
    sample = simulate(spec, grid)
    return subsample(sample, pipe.sim_subsample) if pipe.sim_subsample > 1 else sample


@dataclass(frozen=True)
class ValidationReport:
    model: str
    pipeline: str
    spec: dict
    calibration: dict
    m: int
    n: int
    test: TestResult
    ks_p_value: float
    stages: list
    ensemble: dict | None = None

    def to_dict(self) -> dict:
        d = {
            "model": self.model,
            "pipeline": self.pipeline,
            "spec": self.spec,
            "calibration": self.calibration,
            "m": self.m,
            "n": self.n,
            "test": self.test.to_dict(),
            "ks_p_value": self.ks_p_value,
            "stages": self.stages,
        }
        if self.ensemble is not None:
            d["ensemble"] = self.ensemble
        return d

    def summary(self) -> str:
        t = self.test
        p = f"< {1.0 / (t.n_draws + 1):.1e}" if t.p_value <= 1.0 / (t.n_draws + 1) else f"{t.p_value:.4f}"
        lines = [
            f"model {self.model} ({self.pipeline} pipeline): m={self.m} historical paths, n={self.n} simulated",
            f"  KS p-value on annual changes: {self.ks_p_value:.4f}",
            f"  signature test: N*MMD^2 = {t.statistic:.6g}, threshold = {t.threshold:.6g}, p-value {p}",
            f"  decision at level {t.level}: {'reject' if t.reject else 'do not reject'}",
        ]
        if self.ensemble is not None:
            e = self.ensemble
            lines.append(f"  ensemble: {e['rejected']}/{e['total']} configurations reject -> "
                         f"{'reject' if e['reject'] else 'do not reject'}")
        return "\n".join(lines)


def _stage(stages, name, fn, info=None):
    try:
        out = fn()
    except SigvalError as exc:
        exc.args = (f"[{name}] {exc}",) + exc.args[1:]
        raise
    extra = info(out) if callable(info) else (info or {})
    stages.append({"stage": name, **extra})
    log.info("stage %s done", name)
    return out


def ensemble_configs(pipe: PipelineSpec) -> list[tuple[Representation, Lift, int, bool, bool]]:
    """Cross-product of representations, lifts, orders, signature types and rescaling."""
    if pipe.kind == "volatility":
        reps = [Representation.ORIGINAL, Representation.LOG_PATH, Representation.LOG_RETURNS]
    else:
        reps = [Representation.LOG_PATH, Representation.LOG_RETURNS]
    lifts = [Lift.LEAD_LAG, Lift.TIME_LEAD_LAG, Lift.CUMULATIVE_LEAD_LAG]
    return list(product(reps, lifts, (2, 3, 4), (False, True), (False, True)))


def run_ensemble(hist_level: PathSample, sim_level: PathSample, pipe: PipelineSpec, level: float, seed: int) -> dict:
    """Test every lever combination on positive level paths; reject on a majority."""
    rows = []
    for k, (rep, lift, order, logsig, rescale) in enumerate(ensemble_configs(pipe)):
        cfg = KernelConfig(SignatureConfig(order, logsig, True), TransformSpec(rep, lift, rescale))
        fa = signature_features(apply_transform(hist_level, cfg.transform).values, order, logsig, 2)
        fb = signature_features(apply_transform(sim_level, cfg.transform).values, order, logsig, 2)
        res = test_features(fa, fb, level, np.random.default_rng(derive_seed(seed, 7, k)), rescale=rescale)
        rows.append({**cfg.to_dict(), "p_value": res.p_value, "reject": res.reject})
    rejected = sum(r["reject"] for r in rows)
    return {"total": len(rows), "rejected": rejected, "reject": rejected * 2 > len(rows), "tests": rows}


def run_validation_pipeline(
    series: Series,
    model: str | object,
    pipeline: str | PipelineSpec | None = None,
    *,
    n_sim: int = 1000,
    level: float = DEFAULT_LEVEL,
    seed: int = 0,
    ensemble: bool = False,
    draws: int = DEFAULT_DRAWS,
) -> ValidationReport:
    """Historical paths against simulations of a (calibrated) model.

    Stages: (1) build the monthly one-year historical paths, (2) calibrate or
    take the given spec, simulate ``n_sim`` paths and compare annual changes by
    KS, (3) lead-lag both samples and compute truncated signatures without
    level 1, (4) test with eigenvalues of the pooled Gram matrix.
    """
    if isinstance(model, str):
        name = model
        if pipeline is None:
            pipeline = "volatility" if name in VOL_MODELS else "inflation"
    else:
        name = model.kind
        if pipeline is None:
            pipeline = "volatility" if isinstance(model, (OU, FOU)) else "inflation"
    pipe = pipeline if isinstance(pipeline, PipelineSpec) else PipelineSpec.named(pipeline)
    stages: list = []
    prep = _stage(stages, "split", lambda: prepare_series(series, pipe),
                  info=lambda p: {"observations": int(series.values.size), "monthly": int(p.monthly.size),
                                  "paths": int(len(p.historical)), "nodes": int(p.historical.times.size)})
    if isinstance(model, str):
        spec, details = _stage(stages, "calibrate", lambda: calibrate_model(name, prep, seed), info={"model": name})
    else:
        spec, details = model, {}
    sim = _stage(stages, "simulate", lambda: simulate_for_pipeline(spec, pipe, n_sim, derive_seed(seed, 1)),
                 info=lambda s: {"paths": int(len(s)), "nodes": int(s.times.size)})
    hist_changes = rolling_annual_changes(prep.monthly, pipe.ks_step)
    sim_changes = sim.values[:, -1, 0] - sim.values[:, 0, 0]
    ks = ks_two_sample(hist_changes, sim_changes)
    stages.append({"stage": "ks", "historical_changes": int(hist_changes.size), "p_value": ks})
    cfg = KernelConfig(SignatureConfig(pipe.order, pipe.use_log_signature, True),
                       TransformSpec(Representation.ORIGINAL, Lift.LEAD_LAG, False))
    fa = _stage(stages, "signature_historical",
                lambda: signature_features(apply_transform(prep.historical, cfg.transform).values,
                                           pipe.order, pipe.use_log_signature, 2),
                info=lambda f: {"shape": list(f.shape)})
    fb = _stage(stages, "signature_simulated",
                lambda: signature_features(apply_transform(sim, cfg.transform).values,
                                           pipe.order, pipe.use_log_signature, 2),
                info=lambda f: {"shape": list(f.shape)})
    result = _stage(stages, "test",
                    lambda: test_features(fa, fb, level, np.random.default_rng(derive_seed(seed, 2)),
                                          draws=draws, seed=seed, config=cfg.to_dict()),
                    info=lambda r: {"p_value": r.p_value, "reject": r.reject})
    ens = None
    if ensemble:
        hist_level = PathSample(prep.historical.times, np.exp(prep.historical.values))
        sim_level = PathSample(sim.times, np.exp(sim.values))
        ens = _stage(stages, "ensemble", lambda: run_ensemble(hist_level, sim_level, pipe, level, seed),
                     info=lambda e: {"total": e["total"], "rejected": e["rejected"]})
    return ValidationReport(
        model=name,
        pipeline=pipe.kind,
        spec=spec_to_dict(spec),
        calibration=details,
        m=len(prep.historical),
        n=len(sim),
        test=result,
        ks_p_value=ks,
        stages=stages,
        ensemble=ens,
    )


def power_config_from_mapping(cfg: dict[str, str]) -> PowerStudyConfig:
    """Build a :class:`PowerStudyConfig` from flat config keys.

    Keys: ``model_a.*``, ``model_b.*``, ``study.{m, n, orders, repetitions, level,
    null_draws, eigenvalues, seed, threshold_per_rep, type_i}``,
    ``grid.{steps_per_year, horizon, subsample}``,
    ``transform.{representation, lift, rescale}``,
    ``signature.{log, drop_first_level}``.
    """
    from sigval import config as c

    defaults = PowerStudyConfig.__dataclass_fields__

    def opt(key, conv, name):
        return c.get(cfg, key, conv, defaults[name].default)

    try:
        transform = TransformSpec(
            c.get(cfg, "transform.representation", c.as_str, "original"),
            c.get(cfg, "transform.lift", c.as_str, "lead_lag"),
            c.get(cfg, "transform.rescale", c.as_bool, False),
        )
    except ValueError as exc:
        if isinstance(exc, InvalidArgumentError):
            raise
        raise InvalidArgumentError(str(exc)) from None

    return PowerStudyConfig(
        model_a=c.model_from_config(cfg, "model_a"),
        model_b=c.model_from_config(cfg, "model_b"),
        m_list=tuple(c.get(cfg, "study.m", c.as_int_list, list(defaults["m_list"].default))),
        n=opt("study.n", c.as_int, "n"),
        orders=tuple(c.get(cfg, "study.orders", c.as_int_list, list(defaults["orders"].default))),
        transform=transform,
        use_log_signature=c.get(cfg, "signature.log", c.as_bool, False),
        drop_first_level=c.get(cfg, "signature.drop_first_level", c.as_bool, True),
        level=opt("study.level", c.as_float, "level"),
        repetitions=opt("study.repetitions", c.as_int, "repetitions"),
        null_draws=opt("study.null_draws", c.as_int, "null_draws"),
        top_eigenvalues=opt("study.eigenvalues", c.as_int, "top_eigenvalues"),
        seed=c.get(cfg, "study.seed", c.as_int, 0),
        steps_per_year=opt("grid.steps_per_year", c.as_int, "steps_per_year"),
        horizon=opt("grid.horizon", c.as_float, "horizon"),
        subsample=opt("grid.subsample", c.as_int, "subsample"),
        threshold_per_rep=c.get(cfg, "study.threshold_per_rep", c.as_bool, False),
        type_i=c.get(cfg, "study.type_i", c.as_bool, True),
    )


def with_seed(cfg: PowerStudyConfig, seed: int) -> PowerStudyConfig:
    return replace(cfg, seed=int(seed))
