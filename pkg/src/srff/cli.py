"""Command line front end: run experiments, export datasets, apply models.

Exit codes: 0 success, 1 configuration error, 2 when any experiment cell
failed (results for the remaining cells are still written).
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import fields, replace

import numpy as np

from .data import GENERATORS, CsvParseError, load_csv, save_csv
from .harness import ConfigError, ExperimentConfig, emit_results, run_experiment
from .model import load_model, predict


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the contract reserves 2 for cell
    # failures, so remap usage errors to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(f"error: {message}") from None


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="srff", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a full experiment", parents=[], add_help=True)
    run.add_argument("config_file", nargs="?", help="flat key = value file; flags override")
    run.add_argument("--dataset", help="se1|se2|se3|csv:<path>")
    run.add_argument("--n", type=int, dest="train_n", help="training rows per resample")
    run.add_argument("--test-n", type=int, dest="test_n", help="test (= validation) rows")
    run.add_argument("--features", type=int, dest="n_features", help="random feature count D")
    run.add_argument("--grid-len", type=int, dest="grid_len")
    run.add_argument("--resamples", type=int)
    run.add_argument("--seed", type=int, dest="master_seed")
    run.add_argument("--simplex-size", dest="simplex_size", help="positive real or 'auto'")
    run.add_argument("--methods", help="comma list: mean,ridge,lasso,rff,srff,exact_kernel_ridge")
    run.add_argument("--out", dest="out_dir", help="output directory")
    run.add_argument("--workers", type=int, help="parallel resample workers (0 = serial)")
    run.add_argument("--target", dest="target_column", help="target column for csv datasets")
    run.add_argument("--delimiter", help="csv delimiter")
    run.add_argument("--se3-y-latents", dest="se3_y_latents", help="'1,2' (default) or '1,3'")

    gen = sub.add_parser("gen", help="export a synthetic dataset to CSV")
    gen.add_argument("--dataset", required=True, choices=sorted(GENERATORS))
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output CSV path")

    pred = sub.add_parser("predict", help="apply a saved model to a CSV")
    pred.add_argument("--model", required=True)
    pred.add_argument("--data", required=True, help="CSV with header row")
    pred.add_argument("--target", help="target column (excluded from features; prints RMSE)")
    pred.add_argument("--delimiter", default=",")
    pred.add_argument("--raw", action="store_true",
                      help="use feature columns as-is instead of z-scoring them")
    pred.add_argument("--out", help="write predictions here instead of stdout")
    return parser


_CONFIG_COERCERS = {
    "train_n": int,
    "test_n": int,
    "n_features": int,
    "grid_len": int,
    "resamples": int,
    "master_seed": int,
    "workers": int,
    "srff_outer_max": int,
    "srff_fista_max_iters": int,
    "lasso_max_iters": int,
    "srff_outer_rel_tol": float,
    "srff_fista_rel_tol": float,
}
_FILE_KEY_ALIASES = {
    "n": "train_n",
    "features": "n_features",
    "seed": "master_seed",
    "out": "out_dir",
    "target": "target_column",
}


def _parse_simplex(value):
    if value == "auto":
        return "auto"
    try:
        size = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"simplex-size must be a number or 'auto', got {value!r}")
    return size


def _parse_latents(value):
    try:
        a, b = (int(v) for v in str(value).split(","))
    except ValueError:
        raise ConfigError(f"se3-y-latents must be 'A,B', got {value!r}")
    return (a, b)


def _coerce(key: str, value):
    if key == "methods":
        return tuple(m for m in str(value).split(",") if m.strip())
    if key == "simplex_size":
        return _parse_simplex(value)
    if key == "se3_y_latents":
        return _parse_latents(value)
    if key in _CONFIG_COERCERS:
        try:
            return _CONFIG_COERCERS[key](value)
        except (TypeError, ValueError):
            raise ConfigError(f"invalid value for {key}: {value!r}")
    return value


def _read_config_file(path) -> dict:
    valid_keys = {f.name for f in fields(ExperimentConfig)}
    out = {}
    try:
        text = open(path, "r", encoding="utf-8").read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    for line_num, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        sep = "=" if "=" in stripped else (":" if ":" in stripped else None)
        if sep is None:
            raise ConfigError(f"{path}:{line_num}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split(sep, 1))
        key = key.replace("-", "_")
        key = _FILE_KEY_ALIASES.get(key, key)
        if key not in valid_keys:
            raise ConfigError(f"{path}:{line_num}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def _cmd_run(args) -> int:
    settings = {}
    if args.config_file:
        settings.update(_read_config_file(args.config_file))
    for key in (
        "dataset", "train_n", "test_n", "n_features", "grid_len", "resamples",
        "master_seed", "out_dir", "workers", "target_column", "delimiter",
    ):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if args.simplex_size is not None:
        settings["simplex_size"] = _parse_simplex(args.simplex_size)
    if args.methods is not None:
        settings["methods"] = _coerce("methods", args.methods)
    if args.se3_y_latents is not None:
        settings["se3_y_latents"] = _parse_latents(args.se3_y_latents)
    try:
        config = replace(ExperimentConfig(), **settings)
    except TypeError as exc:
        raise ConfigError(str(exc))
    result = run_experiment(config)
    paths = emit_results(result, config.out_dir)
    print(open(paths["table"], "r", encoding="utf-8").read(), end="")
    print(f"results written to {paths['json']}")
    return 2 if result.failures else 0


def _cmd_gen(args) -> int:
    dataset = GENERATORS[args.dataset](args.n, args.seed)
    save_csv(dataset, args.out)
    print(f"wrote {dataset.n} rows x {dataset.d} features to {args.out}")
    return 0


def _read_feature_csv(path, delimiter: str):
    """All-numeric CSV without a target column; no standardization."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: file is empty")
        rows = []
        for row_num, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise CsvParseError(f"{path}: non-numeric cell at row {row_num}")
    if not rows:
        raise CsvParseError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float), [h.strip() for h in header]


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    actual = None
    if args.target is not None:
        if args.raw:
            table, header = _read_feature_csv(args.data, args.delimiter)
            if args.target not in header:
                raise ConfigError(f"target column {args.target!r} not in {header}")
            t_idx = header.index(args.target)
            actual = table[:, t_idx]
            X = np.delete(table, t_idx, axis=1)
        else:
            dataset, _ = load_csv(args.data, args.target, args.delimiter)
            X = dataset.X
            actual = dataset.y
    else:
        X, _ = _read_feature_csv(args.data, args.delimiter)
        if not args.raw:
            mean = X.mean(axis=0)
            std = X.std(axis=0)
            X = (X - mean) / np.where(std == 0, 1.0, std)
    if X.shape[1] != model.n_dims:
        raise ConfigError(
            f"model expects {model.n_dims} features, data has {X.shape[1]}"
        )
    predictions = predict(model, X)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.writelines(f"{float(p)!r}\n" for p in predictions)
        print(f"wrote {predictions.size} predictions to {args.out}")
    else:
        for p in predictions:
            print(repr(float(p)))
    if actual is not None:
        residual = predictions - actual
        print(f"rmse: {float(np.sqrt(np.mean(residual ** 2))):.6f}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "gen":
            return _cmd_gen(args)
        return _cmd_predict(args)
    except SystemExit as exc:
        # remapped argparse errors carry their message as code
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 1
        return 0 if exc.code in (0, None) else int(exc.code)
    except (ConfigError, CsvParseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
