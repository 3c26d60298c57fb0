"""Synthetic regression generators, CSV ingestion, and seeded splits.

Dimension labels in relevant_dims are 1-based column names (d1, d2, ...),
matching how the generators and result files refer to inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

_MISSING_TOKENS = {"", "na", "nan", "null", "none"}


class CsvParseError(ValueError):
    """A cell could not be parsed; the message names row and column."""


class EmptyDataError(ValueError):
    """No usable rows remained after dropping incomplete ones."""


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    name: str = ""
    relevant_dims: frozenset | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ValueError(
                f"shape mismatch: X {self.X.shape}, y {self.y.shape}"
            )
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError("dataset contains NaN or infinite entries")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class SplitSpec:
    train_n: int
    valid_n: int
    test_n: int
    seed: int

    def __post_init__(self):
        if min(self.train_n, self.valid_n, self.test_n) < 1:
            raise ValueError("all split sizes must be positive")

    @property
    def total(self) -> int:
        return self.train_n + self.valid_n + self.test_n


def se1_signal(X) -> np.ndarray:
    """Noise-free target of the se1 problem: sin((x1+x3)^2) sin(x7 x8 x9)."""
    X = np.asarray(X, dtype=float)
    return np.sin((X[:, 0] + X[:, 2]) ** 2) * np.sin(X[:, 6] * X[:, 7] * X[:, 8])


def se2_signal(X) -> np.ndarray:
    """Noise-free target of the se2 problem: log((x11 + ... + x15)^2)."""
    X = np.asarray(X, dtype=float)
    t = X[:, 10:15].sum(axis=1)
    # exact float cancellation to 0 is astronomically unlikely; the floor
    # only guards the -inf it would produce
    return np.log(np.maximum(t * t, 1e-300))


def se3_signal(z_a, z_b) -> np.ndarray:
    """Noise-free target of the se3 problem from two latent columns."""
    u = np.asarray(z_a, dtype=float) ** 2 + np.asarray(z_b, dtype=float) ** 2
    return 10.0 * u * np.exp(-2.0 * u)


def gen_se1(n: int, seed: int, noise_std: float = 0.1) -> Dataset:
    """18 standard-normal inputs; 5 relevant dims {1,3,7,8,9}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 18))
    y = se1_signal(X)
    if noise_std:
        y = y + noise_std * rng.standard_normal(n)
    return Dataset(X, y, name="se1", relevant_dims=frozenset({1, 3, 7, 8, 9}))


def gen_se2(n: int, seed: int, noise_std: float = 0.1) -> Dataset:
    """100 standard-normal inputs; 5 relevant dims {11..15}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 100))
    y = se2_signal(X)
    if noise_std:
        y = y + noise_std * rng.standard_normal(n)
    return Dataset(X, y, name="se2", relevant_dims=frozenset(range(11, 16)))


def gen_se3(
    n: int,
    seed: int,
    noise_std: float = 0.01,
    y_latents: tuple = (1, 2),
) -> Dataset:
    """1000 columns in groups of 5, each group a noisy copy of one of 200
    standard-normal latents; the target depends on two latents.

    Columns 1-5 copy latent 1 and columns 6-10 copy latent 2, so the 10
    declared relevant dims carry signal when y_latents is (1, 2) (the
    default).  y_latents=(1, 3) reproduces the variant where the target
    reads latent 3 instead, leaving columns 6-10 spuriously declared.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    a, b = y_latents
    if not (1 <= a <= 200 and 1 <= b <= 200 and a != b):
        raise ValueError(f"y_latents must be two distinct latents in 1..200, got {y_latents}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 200))
    X = np.repeat(z, 5, axis=1) + 0.1 * rng.standard_normal((n, 1000))
    y = se3_signal(z[:, a - 1], z[:, b - 1])
    if noise_std:
        y = y + noise_std * rng.standard_normal(n)
    return Dataset(X, y, name="se3", relevant_dims=frozenset(range(1, 11)))


GENERATORS = {"se1": gen_se1, "se2": gen_se2, "se3": gen_se3}


@dataclass
class CsvReport:
    n_rows_read: int
    n_rows_dropped: int
    feature_names: list
    target_column: str
    feature_mean: np.ndarray
    feature_std: np.ndarray


def load_csv(path, target_column: str, delimiter: str = ",") -> tuple:
    """Read a numeric CSV with a header row into a Dataset.

    Features are z-scored column-wise (constant columns divide by 1); the
    target stays raw.  Rows with missing cells ('', na, nan, null, none,
    or a non-finite number) are dropped and counted in the returned
    CsvReport; any other non-numeric cell raises CsvParseError naming its
    row and column.

    Returns (dataset, report).
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: file is empty, expected a header row")
        header = [h.strip() for h in header]
        if target_column not in header:
            raise CsvParseError(
                f"{path}: target column {target_column!r} not in header {header}"
            )
        t_idx = header.index(target_column)
        feature_names = [h for i, h in enumerate(header) if i != t_idx]
        rows = []
        n_read = 0
        n_dropped = 0
        for row_num, row in enumerate(reader, start=1):
            if not row:
                continue
            n_read += 1
            if len(row) != len(header):
                raise CsvParseError(
                    f"{path}: row {row_num} has {len(row)} fields, expected {len(header)}"
                )
            values = np.empty(len(header))
            drop = False
            for col, cell in enumerate(row):
                token = cell.strip()
                if token.lower() in _MISSING_TOKENS:
                    drop = True
                    break
                try:
                    values[col] = float(token)
                except ValueError:
                    raise CsvParseError(
                        f"{path}: non-numeric value {cell!r} at row {row_num}, "
                        f"column {header[col]!r}"
                    ) from None
                if not np.isfinite(values[col]):
                    drop = True
                    break
            if drop:
                n_dropped += 1
                continue
            rows.append(values)
    if not rows:
        raise EmptyDataError(f"{path}: no complete rows left after cleaning")
    table = np.vstack(rows)
    y = table[:, t_idx]
    X = np.delete(table, t_idx, axis=1)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std_safe = np.where(std == 0, 1.0, std)
    dataset = Dataset((X - mean) / std_safe, y, name=str(path))
    report = CsvReport(
        n_rows_read=n_read,
        n_rows_dropped=n_dropped,
        feature_names=feature_names,
        target_column=target_column,
        feature_mean=mean,
        feature_std=std_safe,
    )
    return dataset, report


def save_csv(dataset: Dataset, path, delimiter: str = ",", target_name: str = "y") -> None:
    """Write header x1..xd,<target_name> and full-precision rows."""
    header = [f"x{j}" for j in range(1, dataset.d + 1)] + [target_name]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(header)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.X[i]]
            row.append(repr(float(dataset.y[i])))
            writer.writerow(row)


def split(dataset: Dataset, spec: SplitSpec) -> tuple:
    """Partition rows into disjoint train/valid/test by a seeded shuffle."""
    if spec.total > dataset.n:
        raise ValueError(
            f"insufficient rows: need {spec.total}, dataset has {dataset.n}"
        )
    perm = np.random.default_rng(spec.seed).permutation(dataset.n)
    stops = (spec.train_n, spec.train_n + spec.valid_n, spec.total)
    parts = []
    start = 0
    for tag, stop in zip(("train", "valid", "test"), stops):
        idx = perm[start:stop]
        parts.append(
            Dataset(
                dataset.X[idx],
                dataset.y[idx],
                name=f"{dataset.name}/{tag}",
                relevant_dims=dataset.relevant_dims,
            )
        )
        start = stop
    return tuple(parts)


def split_indices(n: int, spec: SplitSpec) -> tuple:
    """Index sets of the seeded partition (same stream as split)."""
    if spec.total > n:
        raise ValueError(f"insufficient rows: need {spec.total}, have {n}")
    perm = np.random.default_rng(spec.seed).permutation(n)
    return (
        perm[: spec.train_n],
        perm[spec.train_n : spec.train_n + spec.valid_n],
        perm[spec.train_n + spec.valid_n : spec.total],
    )
