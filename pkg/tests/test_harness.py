import json
import math

import numpy as np
import pytest

import srff.harness as harness
from srff.harness import (
    ConfigError,
    ExperimentConfig,
    ExperimentResult,
    emit_results,
    lambda_grid,
    normalize_methods,
    rmse,
    run_experiment,
    support_dims,
)

TINY_SRFF = dict(
    n_features=8,
    grid_len=3,
    srff_outer_max=2,
    srff_fista_max_iters=4,
)


def tiny_config(**overrides):
    base = dict(
        dataset="se1",
        train_n=40,
        test_n=25,
        methods=("mean", "linear_ridge", "srff"),
        resamples=2,
        master_seed=5,
        **TINY_SRFF,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestRmse:
    def test_identical_vectors(self):
        assert rmse(np.ones(4), np.ones(4)) == 0.0

    def test_hand_value(self):
        # sqrt((9 + 16) / 2)
        assert rmse(np.zeros(2), np.array([3.0, 4.0])) == pytest.approx(
            math.sqrt(12.5), rel=1e-15
        )

    def test_matches_loop_oracle(self, rng):
        p = rng.standard_normal(100)
        a = rng.standard_normal(100)
        total = 0.0
        for x, z in zip(p, a):
            total += (x - z) ** 2
        assert rmse(p, a) == pytest.approx(math.sqrt(total / 100), rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rmse(np.zeros(3), np.zeros(4))
        with pytest.raises(ValueError):
            rmse(np.zeros(0), np.zeros(0))


class TestLambdaGrid:
    def test_single_point_is_lambda_max(self, rng):
        F = rng.standard_normal((10, 3))
        y = rng.standard_normal(10)
        grid = lambda_grid(F, y, 1)
        expected = (2.0 / 10) * np.max(np.abs(F.T @ y))
        assert grid.shape == (1,)
        assert grid[0] == pytest.approx(expected, rel=1e-12)

    def test_log_spacing_and_span(self, rng):
        F = rng.standard_normal((20, 4))
        y = rng.standard_normal(20)
        grid = lambda_grid(F, y, 50)
        assert np.all(np.diff(grid) < 0)
        ratios = grid[1:] / grid[:-1]
        assert np.allclose(ratios, ratios[0], rtol=1e-12)
        assert grid[-1] / grid[0] == pytest.approx(1e-6, rel=1e-9)

    def test_analytic_orthonormal_instance(self):
        # F = identity, y aligned with one column: lambda_max = (2/n) |y_1|
        F = np.eye(4)
        y = np.array([2.0, 0.0, 0.0, 0.0])
        grid = lambda_grid(F, y, 5)
        assert grid[0] == pytest.approx(1.0, rel=1e-15)

    def test_degenerate_falls_back(self):
        grid = lambda_grid(np.eye(3), np.zeros(3), 4)
        assert grid[0] == pytest.approx(1.0)
        assert grid[-1] == pytest.approx(1e-6)

    def test_rejects_empty(self, rng):
        with pytest.raises(ValueError):
            lambda_grid(np.eye(2), np.zeros(2), 0)

    def test_top_zeroes_the_lasso(self, rng):
        from srff.optim import solve_lasso

        F = rng.standard_normal((30, 5))
        y = rng.standard_normal(30)
        Fc = F - F.mean(axis=0)
        yc = y - y.mean()
        grid = lambda_grid(Fc, yc, 50)
        assert np.array_equal(solve_lasso(Fc, yc, float(grid[0])), np.zeros(5))


class TestSupportDims:
    def test_threshold(self):
        g = np.array([0.0, 1.0, 0.09, 0.11, 0.0])
        assert support_dims(g) == frozenset({2, 4})

    def test_empty(self):
        assert support_dims(np.zeros(3)) == frozenset()


class TestNormalizeMethods:
    def test_aliases_and_dedup(self):
        assert normalize_methods(["Ridge", "lasso", "ridge", "SRFF"]) == (
            "linear_ridge",
            "linear_lasso",
            "srff",
        )

    def test_unknown(self):
        with pytest.raises(ConfigError):
            normalize_methods(["boosting"])

    def test_empty(self):
        with pytest.raises(ConfigError):
            normalize_methods([])


class TestValidation:
    def test_unknown_dataset(self):
        with pytest.raises(ConfigError):
            run_experiment(tiny_config(dataset="se9"))

    def test_bad_sizes(self):
        with pytest.raises(ConfigError):
            run_experiment(tiny_config(train_n=0))
        with pytest.raises(ConfigError):
            run_experiment(tiny_config(resamples=0))

    def test_bad_simplex(self):
        with pytest.raises(ConfigError):
            run_experiment(tiny_config(simplex_size="tiny"))

    def test_csv_requires_enough_rows(self, tmp_path):
        from srff.data import gen_se1, save_csv

        path = tmp_path / "small.csv"
        save_csv(gen_se1(30, seed=1), path)
        cfg = tiny_config(dataset=f"csv:{path}", train_n=25, test_n=10)
        with pytest.raises(ConfigError, match="rows"):
            run_experiment(cfg)


class TestMeanMethodIdentity:
    def test_rmse_equals_direct_recomputation(self):
        config = tiny_config(methods=("mean",))
        result = run_experiment(config)
        cells = result.methods["mean"].per_resample
        for r, cell in enumerate(cells):
            train, _, test = harness._resample_datasets(
                harness._validate(config), r, None
            )
            expected = math.sqrt(np.mean((test.y - train.y.mean()) ** 2))
            assert cell["rmse"] == pytest.approx(expected, rel=1e-12)

    def test_independent_of_grid_length(self):
        a = run_experiment(tiny_config(methods=("mean",), grid_len=1))
        b = run_experiment(tiny_config(methods=("mean",), grid_len=7))
        assert [c["rmse"] for c in a.methods["mean"].per_resample] == [
            c["rmse"] for c in b.methods["mean"].per_resample
        ]


class TestDeterminismAndEmission:
    def test_byte_identical_reruns(self, tmp_path):
        config = tiny_config(methods=("mean", "srff"))
        out_a = emit_results(run_experiment(config), tmp_path / "a")
        out_b = emit_results(run_experiment(config), tmp_path / "b")
        assert out_a["json"].read_bytes() == out_b["json"].read_bytes()

    def test_worker_count_does_not_change_results(self, tmp_path):
        serial = tiny_config(methods=("mean", "linear_ridge"), workers=0)
        parallel = tiny_config(methods=("mean", "linear_ridge"), workers=2)
        out_s = emit_results(run_experiment(serial), tmp_path / "s")
        out_p = emit_results(run_experiment(parallel), tmp_path / "p")
        assert out_s["json"].read_bytes() == out_p["json"].read_bytes()

    def test_json_roundtrip_matches_in_memory(self, tmp_path):
        result = run_experiment(tiny_config(methods=("mean", "srff")))
        paths = emit_results(result, tmp_path)
        with open(paths["json"], "r", encoding="utf-8") as fh:
            loaded = ExperimentResult.from_json_dict(json.load(fh))
        assert loaded.to_json_dict() == result.to_json_dict()

    def test_gamma_file_has_one_row_per_dimension(self, tmp_path):
        result = run_experiment(tiny_config(methods=("srff",)))
        paths = emit_results(result, tmp_path)
        lines = paths["gamma"].read_text().strip().splitlines()
        assert lines[0] == "dim\tmedian_gamma"
        assert len(lines) == 1 + 18
        dims = [int(line.split("\t")[0]) for line in lines[1:]]
        assert dims == list(range(1, 19))
        for line in lines[1:]:
            float(line.split("\t")[1])

    def test_empty_method_table_is_valid(self, tmp_path):
        result = ExperimentResult(config_echo=tiny_config().echo(), methods={},
                                  srff_gamma_median=None)
        paths = emit_results(result, tmp_path)
        payload = json.loads(paths["json"].read_text())
        assert payload["methods"] == {}
        assert paths["gamma"] is None

    def test_per_resample_seeds_and_lambdas_recorded(self):
        result = run_experiment(tiny_config(methods=("linear_ridge",)))
        cells = result.methods["linear_ridge"].per_resample
        assert len(cells) == 2
        for cell in cells:
            assert set(cell) == {"seed", "lambda", "rmse"}
            assert cell["lambda"] > 0


class TestFailureIsolation:
    def test_failed_cells_recorded_without_aborting(self, monkeypatch):
        original = harness._run_method

        def flaky(method, *args, **kwargs):
            if method == "linear_ridge":
                raise RuntimeError("synthetic failure")
            return original(method, *args, **kwargs)

        monkeypatch.setattr(harness, "_run_method", flaky)
        result = run_experiment(tiny_config(methods=("mean", "linear_ridge")))
        assert len(result.failures) == 2
        assert all(f["method"] == "linear_ridge" for f in result.failures)
        assert math.isnan(result.methods["linear_ridge"].rmse_mean)
        assert len(result.methods["mean"].per_resample) == 2


class TestCsvExperiment:
    def test_split_based_run(self, tmp_path):
        from srff.data import gen_se1, save_csv

        path = tmp_path / "data.csv"
        save_csv(gen_se1(120, seed=3), path)
        config = tiny_config(
            dataset=f"csv:{path}", train_n=60, test_n=25, methods=("mean", "linear_ridge")
        )
        result = run_experiment(config)
        assert not result.failures
        assert len(result.methods["mean"].per_resample) == 2
