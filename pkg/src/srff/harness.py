"""Experiment protocol: lambda-grid model selection on a validation split,
repeated over seeded resamples, with aggregated results and emission.

Per resample r, every stream (train/valid/test draws, row shuffles, the
feature basis) gets its own seed derived from (master_seed, r, stream), so
runs are reproducible cell by cell and resamples can execute in parallel
without changing any result.  The machine-readable output is byte-stable
for a fixed scientific configuration.
"""

from __future__ import annotations

import json
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import BaselineKind, train_baseline
from .data import GENERATORS, Dataset, SplitSpec, load_csv, split
from .features import Kernel, KernelFamily, feature_map, median_heuristic_sigma, sample_basis
from .model import SrffConfig, SrffModel, predict, train_srff
from .optim import FistaOptions, _chol_solve_refined

SRFF_METHOD = "srff"
CANONICAL_METHODS = (
    "mean",
    "linear_ridge",
    "linear_lasso",
    "rff",
    SRFF_METHOD,
    "exact_kernel_ridge",
)
_METHOD_ALIASES = {
    "ridge": "linear_ridge",
    "lasso": "linear_lasso",
    "krr": "exact_kernel_ridge",
}

# Seed-stream codes; one PCG64 stream per (resample, purpose).
_STREAM_TRAIN, _STREAM_VALID, _STREAM_TEST, _STREAM_BASIS, _STREAM_SPLIT, _STREAM_ID = range(6)

GRID_DECADES = 6.0


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 1)."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Scientific settings plus execution knobs (workers, out_dir).

    Only the scientific settings enter the emitted config echo, so results
    are byte-identical across worker counts and output locations.  The
    srff_* fields control the per-lambda trainer budget used by the
    protocol; library defaults stay untouched.
    """

    dataset: str = "se1"
    train_n: int = 1000
    test_n: int = 1000  # validation split always matches the test size
    methods: tuple = ("srff", "rff", "mean", "linear_ridge", "linear_lasso")
    n_features: int = 300
    grid_len: int = 50
    resamples: int = 30
    master_seed: int = 0
    simplex_size: float | str = "auto"
    target_column: str = "y"
    delimiter: str = ","
    se3_y_latents: tuple = (1, 2)
    srff_simplex_scale: float = 0.75
    srff_outer_max: int = 40
    srff_outer_rel_tol: float = 1e-5
    srff_fista_max_iters: int = 50
    srff_fista_rel_tol: float = 1e-6
    srff_step2_dtype: str = "float32"
    lasso_max_iters: int = 1000
    workers: int = 0
    out_dir: str = "results"

    def echo(self) -> dict:
        return {
            "dataset": self.dataset,
            "train_n": self.train_n,
            "test_n": self.test_n,
            "valid_n": self.test_n,
            "methods": list(self.methods),
            "n_features": self.n_features,
            "grid_len": self.grid_len,
            "grid_decades": GRID_DECADES,
            "resamples": self.resamples,
            "master_seed": self.master_seed,
            "simplex_size": self.simplex_size,
            "se3_y_latents": list(self.se3_y_latents) if self.dataset == "se3" else None,
            "srff_simplex_scale": self.srff_simplex_scale,
            "srff_outer_max": self.srff_outer_max,
            "srff_outer_rel_tol": self.srff_outer_rel_tol,
            "srff_fista_max_iters": self.srff_fista_max_iters,
            "srff_fista_rel_tol": self.srff_fista_rel_tol,
            "srff_step2_dtype": self.srff_step2_dtype,
            "lambda_selection": "per-resample validation minimum, ties to larger lambda",
        }


@dataclass
class MethodResult:
    rmse_mean: float
    rmse_std: float
    per_resample: list
    wall_time_s: float = 0.0
    gamma_per_resample: np.ndarray | None = None


@dataclass
class ExperimentResult:
    config_echo: dict
    methods: dict
    srff_gamma_median: np.ndarray | None
    failures: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        methods = {}
        for name, res in self.methods.items():
            methods[name] = {
                "rmse_mean": res.rmse_mean,
                "rmse_std": res.rmse_std,
                "per_resample": res.per_resample,
            }
        gamma = self.srff_gamma_median
        return {
            "config": self.config_echo,
            "methods": methods,
            "srff_gamma_median": None if gamma is None else [float(v) for v in gamma],
            "failures": self.failures,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "ExperimentResult":
        methods = {
            name: MethodResult(
                rmse_mean=entry["rmse_mean"],
                rmse_std=entry["rmse_std"],
                per_resample=entry["per_resample"],
            )
            for name, entry in payload["methods"].items()
        }
        gamma = payload.get("srff_gamma_median")
        return cls(
            config_echo=payload["config"],
            methods=methods,
            srff_gamma_median=None if gamma is None else np.asarray(gamma, dtype=float),
            failures=payload.get("failures", []),
        )


def rmse(predicted, actual) -> float:
    """Root mean squared difference of two equal-length vectors."""
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.ndim != 1 or p.shape != a.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {a.shape}")
    if p.size == 0:
        raise ValueError("need at least one value")
    return float(np.sqrt(np.mean((p - a) ** 2)))


def lambda_grid(F, y, grid_len: int = 50, decades: float = GRID_DECADES) -> np.ndarray:
    """Descending log grid from lambda_max = (2/n)||F'y||_inf over `decades`.

    lambda_max is exactly the per-sample-loss weight at which the lasso on
    (F, y) returns the zero vector, so the grid top is a mean-predictor
    anchor shared by all methods.  Falls back to [1 .. 1e-6] when F'y = 0.
    """
    if grid_len < 1:
        raise ValueError("grid_len must be >= 1")
    F = np.asarray(F, dtype=float)
    y = np.asarray(y, dtype=float)
    lam_max = (2.0 / F.shape[0]) * float(np.max(np.abs(F.T @ y)))
    if not np.isfinite(lam_max) or lam_max <= 0:
        return np.geomspace(1.0, 1e-6, grid_len)
    return np.geomspace(lam_max, lam_max * 10.0 ** (-decades), grid_len)


def support_dims(gamma_median, frac: float = 0.1) -> frozenset:
    """1-based dims whose median scale exceeds frac of the largest one."""
    g = np.asarray(gamma_median, dtype=float)
    if g.size == 0 or g.max() <= 0:
        return frozenset()
    return frozenset(int(i) + 1 for i in np.nonzero(g > frac * g.max())[0])


def normalize_methods(methods) -> tuple:
    out = []
    for name in methods:
        key = str(name).strip().lower().replace("-", "_")
        key = _METHOD_ALIASES.get(key, key)
        if key not in CANONICAL_METHODS:
            raise ConfigError(
                f"unknown method {name!r}; choose from {', '.join(CANONICAL_METHODS)}"
            )
        if key not in out:
            out.append(key)
    if not out:
        raise ConfigError("no methods requested")
    return tuple(out)


def _validate(config: ExperimentConfig) -> ExperimentConfig:
    if not (config.dataset in GENERATORS or config.dataset.startswith("csv:")):
        raise ConfigError(
            f"unknown dataset {config.dataset!r}; use se1|se2|se3|csv:<path>"
        )
    if config.train_n < 1 or config.test_n < 1:
        raise ConfigError("train_n and test_n must be positive")
    if config.grid_len < 1:
        raise ConfigError("grid_len must be >= 1")
    if config.resamples < 1:
        raise ConfigError("resamples must be >= 1")
    if config.n_features < 1:
        raise ConfigError("n_features must be >= 1")
    if config.master_seed < 0:
        raise ConfigError("master_seed must be nonnegative")
    if config.simplex_size != "auto":
        try:
            ok = float(config.simplex_size) > 0
        except (TypeError, ValueError):
            ok = False
        if not ok:
            raise ConfigError("simplex_size must be a positive number or 'auto'")
    methods = normalize_methods(config.methods)
    return _replace_frozen(config, methods=methods)


def _replace_frozen(config: ExperimentConfig, **kwargs) -> ExperimentConfig:
    from dataclasses import replace

    return replace(config, **kwargs)


def derive_seed(master_seed: int, resample: int, stream: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(resample, stream))
    return int(ss.generate_state(1, np.uint64)[0])


def _resample_datasets(config: ExperimentConfig, r: int, source: Dataset | None):
    if source is not None:
        spec = SplitSpec(
            train_n=config.train_n,
            valid_n=config.test_n,
            test_n=config.test_n,
            seed=derive_seed(config.master_seed, r, _STREAM_SPLIT),
        )
        return split(source, spec)
    gen = GENERATORS[config.dataset]
    kwargs = {"y_latents": tuple(config.se3_y_latents)} if config.dataset == "se3" else {}
    train = gen(config.train_n, derive_seed(config.master_seed, r, _STREAM_TRAIN), **kwargs)
    valid = gen(config.test_n, derive_seed(config.master_seed, r, _STREAM_VALID), **kwargs)
    test = gen(config.test_n, derive_seed(config.master_seed, r, _STREAM_TEST), **kwargs)
    return train, valid, test


def _ridge_grid_coefs(Z, y, raw_lams):
    """Coefficients of (Z'Z + lam I) a = Z'y for every lam, sharing the Gram."""
    G = Z.T @ Z
    b = Z.T @ y
    out = []
    for lam in raw_lams:
        A = G.copy()
        A[np.diag_indices_from(A)] += lam
        out.append(_chol_solve_refined(A, b, f"ridge grid (lam={lam:g})"))
    return out


def _run_method(method, config, grid, train, valid, test, sigma, basis_seed):
    """Fit one method over the grid; returns its selected-model cell."""
    n = train.n
    d = train.d
    family = KernelFamily(Kernel.GAUSSIAN, sigma)

    def select(val_test_pairs):
        best = None
        for lam, val, tst, extra in val_test_pairs:
            if best is None or val < best[1]:
                best = (lam, val, tst, extra)
        return best

    if method == "mean":
        pred = train_baseline(BaselineKind.MEAN, train.X, train.y)
        # constant over the grid; ties resolve to the largest lambda
        return {
            "lambda": float(grid[0]),
            "rmse": rmse(pred.predict(test.X), test.y),
            "gamma": None,
        }

    if method in ("linear_ridge", "linear_lasso"):
        kind = BaselineKind.LINEAR_RIDGE if method == "linear_ridge" else BaselineKind.LINEAR_LASSO
        lasso_opts = FistaOptions(max_iters=config.lasso_max_iters, rel_tol=1e-9)

        def cells():
            for lam in grid:
                pred = train_baseline(
                    kind, train.X, train.y, float(lam), lasso_opts=lasso_opts
                )
                yield (
                    float(lam),
                    rmse(pred.predict(valid.X), valid.y),
                    rmse(pred.predict(test.X), test.y),
                    None,
                )

        lam, _, tst, _ = select(cells())
        return {"lambda": lam, "rmse": tst, "gamma": None}

    if method == "rff":
        basis = sample_basis(d, config.n_features, family, basis_seed)
        gamma = np.full(d, 1.0 / sigma)
        Z_train = feature_map(basis, gamma, train.X)
        Z_valid = feature_map(basis, gamma, valid.X)
        Z_test = feature_map(basis, gamma, test.X)
        # function-norm weight: raw system weight is n * D * lam for the
        # unnormalized cosine features (matches exact kernel ridge at lam)
        coefs = _ridge_grid_coefs(
            Z_train, train.y, [n * config.n_features * float(lam) for lam in grid]
        )

        def cells():
            for lam, coef in zip(grid, coefs):
                yield (
                    float(lam),
                    rmse(Z_valid @ coef, valid.y),
                    rmse(Z_test @ coef, test.y),
                    None,
                )

        lam, _, tst, _ = select(cells())
        return {"lambda": lam, "rmse": tst, "gamma": None}

    if method == "exact_kernel_ridge":
        def cells():
            for lam in grid:
                pred = train_baseline(
                    BaselineKind.EXACT_KERNEL_RIDGE, train.X, train.y, float(lam), family=family
                )
                yield (
                    float(lam),
                    rmse(pred.predict(valid.X), valid.y),
                    rmse(pred.predict(test.X), test.y),
                    None,
                )

        lam, _, tst, _ = select(cells())
        return {"lambda": lam, "rmse": tst, "gamma": None}

    if method == SRFF_METHOD:
        # The auto simplex applies the protocol's sparsity-pressure scale;
        # the published selection patterns need a tighter budget than the
        # plain d/sigma rule in low dimension.
        if config.simplex_size == "auto":
            s = config.srff_simplex_scale * d / sigma
        else:
            s = float(config.simplex_size)
        fista = FistaOptions(
            max_iters=config.srff_fista_max_iters,
            rel_tol=config.srff_fista_rel_tol,
        )

        def cells():
            for lam in grid:
                srff_config = SrffConfig(
                    ridge_weight=n * config.n_features * float(lam),
                    n_features=config.n_features,
                    simplex_size=s,
                    outer_max=config.srff_outer_max,
                    outer_rel_tol=config.srff_outer_rel_tol,
                    fista=fista,
                    seed=basis_seed,
                    step2_dtype=config.srff_step2_dtype,
                )
                model = train_srff(train.X, train.y, srff_config)
                yield (
                    float(lam),
                    rmse(predict(model, valid.X), valid.y),
                    rmse(predict(model, test.X), test.y),
                    model.gamma.gamma,
                )

        lam, _, tst, gamma = select(cells())
        return {"lambda": lam, "rmse": tst, "gamma": gamma}

    raise ConfigError(f"unknown method {method!r}")


def _run_resample(config: ExperimentConfig, r: int, source: Dataset | None) -> dict:
    train, valid, test = _resample_datasets(config, r, source)
    sigma = median_heuristic_sigma(train.X)
    x_mean = train.X.mean(axis=0)
    y_mean = train.y.mean()
    grid = lambda_grid(train.X - x_mean, train.y - y_mean, config.grid_len)
    basis_seed = derive_seed(config.master_seed, r, _STREAM_BASIS)
    row = {
        "resample": r,
        "seed": derive_seed(config.master_seed, r, _STREAM_ID),
        "methods": {},
        "failures": [],
    }
    for method in config.methods:
        started = time.perf_counter()
        try:
            cell = _run_method(method, config, grid, train, valid, test, sigma, basis_seed)
        except Exception as exc:  # per-cell isolation
            row["failures"].append(
                {"method": method, "resample": r, "error": f"{type(exc).__name__}: {exc}"}
            )
            continue
        cell["seconds"] = time.perf_counter() - started
        row["methods"][method] = cell
    return row


def _resample_worker(payload):
    config, r, source = payload
    return _run_resample(config, r, source)


def _aggregate(config: ExperimentConfig, rows: list) -> ExperimentResult:
    methods: dict = {}
    for method in config.methods:
        per_resample = []
        rmses = []
        gammas = []
        seconds = 0.0
        for row in rows:
            cell = row["methods"].get(method)
            if cell is None:
                continue
            per_resample.append(
                {"seed": row["seed"], "lambda": cell["lambda"], "rmse": cell["rmse"]}
            )
            rmses.append(cell["rmse"])
            seconds += cell["seconds"]
            if cell.get("gamma") is not None:
                gammas.append(cell["gamma"])
        if rmses:
            arr = np.asarray(rmses)
            mean = float(arr.mean())
            std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        else:
            mean = std = float("nan")
        methods[method] = MethodResult(
            rmse_mean=mean,
            rmse_std=std,
            per_resample=per_resample,
            wall_time_s=seconds,
            gamma_per_resample=np.vstack(gammas) if gammas else None,
        )
    gamma_median = None
    srff_res = methods.get(SRFF_METHOD)
    if srff_res is not None and srff_res.gamma_per_resample is not None:
        gamma_median = np.median(srff_res.gamma_per_resample, axis=0)
    failures = [f for row in rows for f in row["failures"]]
    return ExperimentResult(
        config_echo=config.echo(),
        methods=methods,
        srff_gamma_median=gamma_median,
        failures=failures,
    )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run the full protocol; deterministic for a fixed scientific config."""
    config = _validate(config)
    source = None
    if config.dataset.startswith("csv:"):
        source, _ = load_csv(config.dataset[4:], config.target_column, config.delimiter)
        need = config.train_n + 2 * config.test_n
        if need > source.n:
            raise ConfigError(
                f"dataset has {source.n} rows, splits need {need}"
            )
    tasks = [(config, r, source) for r in range(config.resamples)]
    if config.workers and config.workers > 1:
        # Children inherit single-threaded BLAS; resamples are the parallel unit.
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, "1")
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=config.workers, mp_context=ctx) as pool:
            rows = list(pool.map(_resample_worker, tasks))
    else:
        rows = [_run_resample(config, r, source) for r in range(config.resamples)]
    return _aggregate(config, rows)


def emit_results(result: ExperimentResult, out_dir) -> dict:
    """Write results.json, a human-readable table, and the scale medians.

    Returns {"json": path, "table": path, "gamma": path or None}.  The JSON
    document is byte-identical across reruns of the same configuration;
    wall times appear only in the table.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "results.json"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(result.to_json_dict(), fh, indent=2)
        fh.write("\n")

    table_path = out / "results.txt"
    echo = result.config_echo
    lines = [
        "dataset={dataset} train_n={train_n} test_n={test_n} resamples={resamples} "
        "D={n_features} grid_len={grid_len} master_seed={master_seed}".format(**echo),
        f"{'method':<20}{'rmse_mean':>12}{'rmse_std':>12}{'time_s':>10}",
    ]
    for name, res in result.methods.items():
        lines.append(
            f"{name:<20}{res.rmse_mean:>12.4f}{res.rmse_std:>12.4f}{res.wall_time_s:>10.1f}"
        )
    if result.failures:
        lines.append(f"failed cells: {len(result.failures)}")
        for failure in result.failures:
            lines.append(f"  {failure['method']} r{failure['resample']}: {failure['error']}")
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    gamma_path = None
    if result.srff_gamma_median is not None:
        gamma_path = out / "gamma_median.tsv"
        with open(gamma_path, "w", encoding="utf-8") as fh:
            fh.write("dim\tmedian_gamma\n")
            for i, value in enumerate(result.srff_gamma_median, start=1):
                fh.write(f"{i}\t{float(value)!r}\n")

    return {"json": json_path, "table": table_path, "gamma": gamma_path}
