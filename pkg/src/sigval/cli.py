"""Command-line entry point: ``sigval <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
``test`` exits 0 whether or not the null hypothesis is rejected.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from sigval import config as c
from sigval import harness
from sigval.calibration import rsar1_annual_moments
from sigval.errors import DataError, InvalidArgumentError, NumericalError
from sigval.io import read_paths_csv, read_series_csv, resolve_data, write_paths_csv
from sigval.mmd import DEFAULT_DRAWS, DEFAULT_LEVEL, KernelConfig, sample_features, test_features
from sigval.models import SimGrid, simulate, spec_to_dict, subsample
from sigval.signature import SignatureConfig
from sigval.transforms import Lift, Representation, TransformSpec

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--seed", type=int, default=None, help="master seed (overrides the config file)")
    g.add_argument("--config", help="flat key = value config file")
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    g.add_argument("--out", help="output file (default: stdout)")
    g.add_argument("--format", choices=("json", "csv"), default="json")
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def _kernel_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--log-signature", action="store_true", default=None)
    p.add_argument("--keep-first-level", action="store_true", default=None)
    p.add_argument("--representation", choices=[r.value for r in Representation], default=None)
    p.add_argument("--lift", choices=[lf.value for lf in Lift], default=None)
    p.add_argument("--rescale", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    p = _Parser(prog="sigval", description="Signature-kernel two-sample tests for stochastic-process paths.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="simulate a model to a paths CSV")
    s.add_argument("--paths", type=int, default=None, help="number of paths (grid.paths)")
    s.add_argument("--steps-per-year", type=int, default=None)
    s.add_argument("--horizon", type=float, default=None)
    s.add_argument("--subsample", type=int, default=None)

    s = sub.add_parser("sig", parents=[common], help="signature features of a paths CSV")
    s.add_argument("--paths", required=True, help="paths CSV")
    _kernel_args(s)

    s = sub.add_parser("test", parents=[common], help="two-sample test between two paths CSVs")
    s.add_argument("--a", required=True, help="first sample (paths CSV)")
    s.add_argument("--b", required=True, help="second sample (paths CSV)")
    s.add_argument("--level", type=float, default=None)
    s.add_argument("--draws", type=int, default=None)
    s.add_argument("--eigenvalues", type=int, default=None)
    _kernel_args(s)

    s = sub.add_parser("power", parents=[common], help="power study from a config file")
    s.add_argument("--threshold-per-rep", action="store_true", help="recompute the null threshold every repetition")
    s.add_argument("--timing", action="store_true", help="include wall times (breaks byte reproducibility)")

    s = sub.add_parser("calibrate", parents=[common], help="calibrate a model on a historical series")
    s.add_argument("--data", required=True, help="series CSV, or bundled:sp500_vol / bundled:cpi")
    s.add_argument("--model", required=True, choices=harness.VOL_MODELS + harness.INFLATION_MODELS)

    s = sub.add_parser("validate", parents=[common], help="historical paths against simulated model paths")
    s.add_argument("--data", required=True, help="series CSV, or bundled:sp500_vol / bundled:cpi")
    s.add_argument("--model", help="model to calibrate (ou, fou, grw, rsar1); otherwise model.* config keys")
    s.add_argument("--calibrate", action="store_true", help="calibrate --model on the data (the default with --model)")
    s.add_argument("--pipeline", choices=("volatility", "inflation"), default=None)
    s.add_argument("--n-sim", type=int, default=None)
    s.add_argument("--level", type=float, default=None)
    s.add_argument("--draws", type=int, default=None)
    s.add_argument("--ensemble", action="store_true", help="majority vote over the lever grid")
    return p


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _load_cfg(args) -> dict[str, str]:
    cfg = c.load_config(args.config) if args.config else {}
    return c.apply_overrides(cfg, args.set)


def _seed(args, cfg, key="seed") -> int:
    if args.seed is not None:
        return args.seed
    return c.get(cfg, key, c.as_int, 0)


def _kernel_cfg(args, cfg) -> KernelConfig:
    def pick(flag, key, conv, default):
        return flag if flag is not None else c.get(cfg, key, conv, default)

    order = pick(args.order, "signature.order", c.as_int, 2)
    logsig = pick(args.log_signature, "signature.log", c.as_bool, False)
    keep = args.keep_first_level
    drop = (not keep) if keep is not None else c.get(cfg, "signature.drop_first_level", c.as_bool, True)
    rep = pick(args.representation, "transform.representation", c.as_str, "original")
    lift = pick(args.lift, "transform.lift", c.as_str, "lead_lag")
    rescale = pick(args.rescale, "transform.rescale", c.as_bool, False)
    try:
        transform = TransformSpec(rep, lift, rescale)
    except ValueError as exc:
        raise InvalidArgumentError(str(exc)) from None
    return KernelConfig(SignatureConfig(order, logsig, drop), transform)


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in r.items()})
    return buf.getvalue()


def _flat_rows(d: dict, prefix: str = "") -> list[dict]:
    rows = []
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            rows += _flat_rows(v, key + ".")
        else:
            rows.append({"key": key, "value": v})
    return rows


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _load_cfg(args)
    spec = c.model_from_config(cfg, "model")
    grid = SimGrid(
        n_paths=args.paths if args.paths is not None else c.get(cfg, "grid.paths", c.as_int, 1000),
        steps_per_year=args.steps_per_year or c.get(cfg, "grid.steps_per_year", c.as_int, 12),
        horizon=args.horizon or c.get(cfg, "grid.horizon", c.as_float, 1.0),
        seed=_seed(args, cfg, "grid.seed"),
    )
    sample = simulate(spec, grid)
    every = args.subsample or c.get(cfg, "grid.subsample", c.as_int, 1)
    if every > 1:
        sample = subsample(sample, every)
    if args.format == "csv":
        if not args.out:
            raise InvalidArgumentError("simulate --format csv needs --out")
        write_paths_csv(sample, args.out)
    else:
        _emit(args, _json({"model": spec_to_dict(spec), "times": sample.times.tolist(),
                           "values": sample.values.tolist()}))
    return EXIT_OK


def cmd_sig(args) -> int:
    cfg = _load_cfg(args)
    kcfg = _kernel_cfg(args, cfg)
    feats = sample_features(read_paths_csv(args.paths), kcfg)
    if args.format == "csv":
        rows = [{"path_id": i, **{f"f{j}": repr(float(x)) for j, x in enumerate(row)}} for i, row in enumerate(feats)]
        _emit(args, _csv(rows))
    else:
        _emit(args, _json({"config": kcfg.to_dict(), "features": feats.tolist()}))
    return EXIT_OK


def cmd_test(args) -> int:
    cfg = _load_cfg(args)
    kcfg = _kernel_cfg(args, cfg)
    a, b = read_paths_csv(args.a), read_paths_csv(args.b)
    if a.times.size != b.times.size or not np.allclose(a.times, b.times):
        raise DataError("the two samples must share the same time grid")
    seed = _seed(args, cfg, "study.seed")
    level = args.level if args.level is not None else c.get(cfg, "study.level", c.as_float, DEFAULT_LEVEL)
    draws = args.draws or c.get(cfg, "study.null_draws", c.as_int, DEFAULT_DRAWS)
    top = args.eigenvalues or c.get(cfg, "study.eigenvalues", c.as_int, 20)
    fa, fb = sample_features(a, kcfg), sample_features(b, kcfg)
    res = test_features(fa, fb, level, np.random.default_rng(seed), rescale=kcfg.transform.rescale,
                        top=top, draws=draws, seed=seed, config=kcfg.to_dict())
    d = res.to_dict()
    _emit(args, _csv(_flat_rows(d)) if args.format == "csv" else _json(d))
    return EXIT_OK


def cmd_power(args) -> int:
    cfg = _load_cfg(args)
    if not cfg:
        raise InvalidArgumentError("power needs --config (or --set model_a.kind=... etc.)")
    pcfg = harness.power_config_from_mapping(cfg)
    if args.seed is not None:
        pcfg = harness.with_seed(pcfg, args.seed)
    if args.threshold_per_rep:
        pcfg = harness.replace(pcfg, threshold_per_rep=True)
    report = harness.run_power_study(pcfg, threads=args.threads, timing=args.timing)
    if args.format == "csv":
        _emit(args, _csv([{k: v for k, v in cell.__dict__.items() if k != "eigenvalues"} for cell in report.cells]))
    else:
        _emit(args, report.to_json() + "\n")
    return EXIT_OK


def _series(args):
    return read_series_csv(resolve_data(args.data))


def cmd_calibrate(args) -> int:
    cfg = _load_cfg(args)
    seed = _seed(args, cfg)
    pipe = harness.PipelineSpec.named("volatility" if args.model in harness.VOL_MODELS else "inflation")
    prep = harness.prepare_series(_series(args), pipe)
    spec, details = harness.calibrate_model(args.model, prep, seed)
    out = {"model": spec_to_dict(spec), "calibration": details, "historical_paths": len(prep.historical)}
    if args.model == "rsar1":
        out["annual_moments"] = rsar1_annual_moments(spec).__dict__
    if args.format == "csv":
        _emit(args, "\n".join(c.model_to_config(spec, "model")) + "\n")
    else:
        _emit(args, _json(out))
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load_cfg(args)
    seed = _seed(args, cfg)
    if args.model:
        model = args.model
    elif args.calibrate:
        raise InvalidArgumentError("--calibrate needs --model")
    else:
        model = c.model_from_config(cfg, "model")
    report = harness.run_validation_pipeline(
        _series(args),
        model,
        args.pipeline,
        n_sim=args.n_sim or c.get(cfg, "validate.n_sim", c.as_int, 1000),
        level=args.level if args.level is not None else c.get(cfg, "validate.level", c.as_float, DEFAULT_LEVEL),
        seed=seed,
        ensemble=args.ensemble,
        draws=args.draws or c.get(cfg, "validate.null_draws", c.as_int, DEFAULT_DRAWS),
    )
    if args.format == "csv":
        d = report.to_dict()
        d.pop("stages")
        if "ensemble" in d:
            d["ensemble"] = {k: v for k, v in d["ensemble"].items() if k != "tests"}
        _emit(args, _csv(_flat_rows(d)))
    else:
        _emit(args, _json(report.to_dict()))
    print(report.summary(), file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "sig": cmd_sig,
    "test": cmd_test,
    "power": cmd_power,
    "calibrate": cmd_calibrate,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("sigval: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except DataError as exc:
        print(f"sigval: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"sigval: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidArgumentError, UsageError) as exc:
        print(f"sigval: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
