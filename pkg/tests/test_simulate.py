"""Tests for data generation and the replicate harness."""

import math

import numpy as np
import numpy.testing as nptest
import pytest

from core.exceptions import InvalidArgumentError
from core.replicate_pool import available_cpus
from core.rkhs_spline import SplineMeanCurve
from core.simulate import (
    GroundTruth,
    MethodSummary,
    SimulationConfig,
    design_points,
    dropout_setting1,
    dropout_setting2,
    evaluate_replicate,
    generate,
    mse,
    mu_setting1,
    mu_setting2,
    run_replicates,
    run_sweep,
    truth_setting1,
)

TINY = SimulationConfig(n_points=15, n_per_point=20, replicates=2)


def _constant_truth(mean: float, p_zero: float = 0.0) -> GroundTruth:
    return GroundTruth(
        mu_true=lambda t: np.full(np.shape(t), mean),
        p_zero_true=lambda t: np.full(np.shape(t), p_zero),
    )


class TestGroundTruth:
    def test_setting1_values(self) -> None:
        assert mu_setting1(0.0) == pytest.approx(2.5)
        assert mu_setting1(0.5) == pytest.approx(0.544940, abs=1e-6)
        assert dropout_setting1(0.5) == pytest.approx(0.26894, abs=1e-5)

    def test_setting2_values(self) -> None:
        assert mu_setting2(0.2) == pytest.approx(3.19154, abs=1e-5)
        assert mu_setting2(0.45) == pytest.approx(1.71293, abs=1e-4)
        assert dropout_setting2(0.0) == pytest.approx(0.5)

    def test_shift_moves_mean_only(self) -> None:
        data, truth = generate(SimulationConfig(shift=2.0, n_points=5, n_per_point=3))
        nptest.assert_allclose(truth.mu_true(data.points), mu_setting1(data.points) + 2.0)
        nptest.assert_allclose(truth.p_zero_true(data.points), dropout_setting1(data.points))

    def test_poisson_reading_complements_second_curve(self) -> None:
        truth = truth_setting1().as_poisson_probability()
        assert truth.p_zero_true(0.5) == pytest.approx(1 - 0.26894, abs=1e-5)
        assert truth.mu_true(0.5) == pytest.approx(mu_setting1(0.5))
        assert truth.name == "setting1:poisson"

    def test_truth_convention_applies_to_builtin_truths(self) -> None:
        config = SimulationConfig(setting=2, n_points=5, n_per_point=3, truth_convention="poisson")
        data, truth = generate(config)
        nptest.assert_allclose(truth.p_zero_true(data.points), 1 - dropout_setting2(data.points))

    def test_truth_convention_leaves_custom_truth_alone(self) -> None:
        config = SimulationConfig(n_points=5, n_per_point=3, truth_convention="poisson")
        _, truth = generate(config, _constant_truth(2.0, 0.1))
        nptest.assert_allclose(truth.p_zero_true(np.linspace(0, 1, 4)), 0.1)


class TestGenerate:
    def test_design_points(self) -> None:
        t = design_points(41)
        assert t.size == 41
        assert t[0] == pytest.approx(1e-6) and t[-1] == pytest.approx(1 - 1e-6)
        nptest.assert_allclose(np.diff(t), (1 - 2e-6) / 40)

    def test_shape(self) -> None:
        data, _ = generate(SimulationConfig(seed=1))
        assert data.n_points == 41
        nptest.assert_array_equal(data.replicates, 80)
        assert data.domain == (0.0, 1.0)

    def test_deterministic_per_seed(self) -> None:
        first, _ = generate(SimulationConfig(seed=9))
        second, _ = generate(SimulationConfig(seed=9))
        other, _ = generate(SimulationConfig(seed=10))
        nptest.assert_array_equal(first.flat_counts, second.flat_counts)
        assert not np.array_equal(first.flat_counts, other.flat_counts)

    def test_certain_dropout_gives_zeros(self) -> None:
        data, _ = generate(SimulationConfig(n_points=5, n_per_point=50), _constant_truth(3.0, 1.0))
        assert not np.any(data.flat_counts)

    def test_vanishing_overdispersion_matches_poisson(self) -> None:
        truth = _constant_truth(2.0)
        poisson, _ = generate(SimulationConfig(n_points=2, n_per_point=50000, seed=1), truth)
        nb, _ = generate(SimulationConfig(n_points=2, n_per_point=50000, seed=2, overdispersion=1e-12), truth)
        se = math.sqrt(2.0 / poisson.n_obs + 2.0 / nb.n_obs)
        assert abs(poisson.flat_counts.mean() - nb.flat_counts.mean()) <= 3 * se

    def test_negative_binomial_variance(self) -> None:
        truth = _constant_truth(2.0)
        data, _ = generate(SimulationConfig(n_points=2, n_per_point=50000, seed=3, overdispersion=0.3), truth)
        y = data.flat_counts
        assert y.var(ddof=1) / y.mean() == pytest.approx(1 + 0.3 * 2.0, rel=0.05)

    def test_zero_fraction(self) -> None:
        data, truth = generate(SimulationConfig(n_per_point=8000, seed=4))
        p0 = truth.p_zero_true(data.points)
        expected = p0 + (1 - p0) * np.exp(-truth.mu_true(data.points))
        observed = np.array([np.mean(row == 0) for row in data.counts])
        se = np.sqrt(expected * (1 - expected) / 8000)
        assert np.all(np.abs(observed - expected) <= 4.5 * se)

    def test_rejects_non_positive_mean(self) -> None:
        with pytest.raises(InvalidArgumentError):
            generate(SimulationConfig(n_points=3, n_per_point=2), _constant_truth(0.0))

    @pytest.mark.parametrize("field, value", [
        ("setting", 3), ("n_points", 1), ("overdispersion", -0.1), ("shift", -1.0), ("truth_convention", "both"),
    ])
    def test_config_validation(self, field, value) -> None:
        with pytest.raises(InvalidArgumentError):
            SimulationConfig(**{field: value})


class TestMSE:
    def test_constant_offset(self) -> None:
        points = np.linspace(0.1, 0.9, 9)
        curve = SplineMeanCurve.constant(points, (0.0, 1.0), 2.0)
        assert mse(curve, _constant_truth(1.5), points) == pytest.approx(0.25, rel=1e-12)

    def test_hand_computed(self) -> None:
        points = np.array([0.1, 0.5, 0.9])
        curve = SplineMeanCurve.constant(points, (0.0, 1.0), 1.0)
        truth = GroundTruth(mu_true=lambda t: np.asarray(t), p_zero_true=lambda t: np.zeros_like(t))
        assert mse(curve, truth, points) == pytest.approx((0.81 + 0.25 + 0.01) / 3, rel=1e-12)


class TestReplicates:
    def test_summary_statistics(self) -> None:
        summary = MethodSummary.from_scores("dss", [0.1, None, 0.3])
        assert summary.mean_mse == pytest.approx(0.2)
        assert summary.std_mse == pytest.approx(math.sqrt(0.02))
        assert summary.effective_R == 2 and summary.failures == 1

    def test_evaluate_replicate_scores_every_method(self, fast_settings) -> None:
        scores, errors = evaluate_replicate(TINY, 5, ["ziss", "nzss", "dss"], fast_settings)
        assert set(scores) == {"ziss", "nzss", "dss"}
        assert not errors
        assert all(s is not None and s >= 0 for s in scores.values())

    def test_fixed_seed_gives_zero_spread(self, fast_settings) -> None:
        summaries = run_replicates(TINY, ["ziss", "dss"], jobs=1, vary_seed=False, settings=fast_settings)
        for summary in summaries.values():
            assert summary.effective_R == 2
            assert summary.std_mse == 0.0

    def test_deterministic(self, fast_settings) -> None:
        first = run_replicates(TINY, ["nzss"], settings=fast_settings)
        second = run_replicates(TINY, ["nzss"], settings=fast_settings)
        nptest.assert_array_equal(first["nzss"].mses, second["nzss"].mses)

    def test_needs_two_replicates(self, fast_settings) -> None:
        config = SimulationConfig(n_points=15, n_per_point=20, replicates=1)
        with pytest.raises(InvalidArgumentError):
            run_replicates(config, ["dss"], settings=fast_settings)

    def test_unknown_method(self, fast_settings) -> None:
        with pytest.raises(InvalidArgumentError):
            run_replicates(TINY, ["lasso"], settings=fast_settings)

    def test_sweep(self, fast_settings) -> None:
        results = run_sweep(TINY, "shift", [0.0, 1.0], ["nzss"], settings=fast_settings)
        assert [value for value, _ in results] == [0.0, 1.0]
        assert all(summaries["nzss"].effective_R == 2 for _, summaries in results)

    def test_sweep_parameter(self, fast_settings) -> None:
        with pytest.raises(InvalidArgumentError):
            run_sweep(TINY, "seed", [1.0], ["nzss"], settings=fast_settings)


@pytest.mark.slow
class TestSimulationStudy:
    """Replicate studies under the default settings."""

    def test_setting1_table(self) -> None:
        summaries = run_replicates(SimulationConfig(setting=1), jobs=available_cpus())
        ziss = summaries["ziss"].mean_mse
        assert 0.0 < ziss <= 0.05
        assert ziss < summaries["nzss"].mean_mse
        assert ziss < summaries["dss"].mean_mse

    def test_setting2_table(self) -> None:
        summaries = run_replicates(SimulationConfig(setting=2), jobs=available_cpus())
        ziss = summaries["ziss"].mean_mse
        assert 0.0 < ziss <= 0.05
        assert ziss < summaries["nzss"].mean_mse
        assert ziss < summaries["dss"].mean_mse

    def test_setting1_table_poisson_reading(self) -> None:
        config = SimulationConfig(setting=1, truth_convention="poisson")
        summaries = run_replicates(config, jobs=available_cpus())
        ziss, nzss, dss = (summaries[m].mean_mse for m in ("ziss", "nzss", "dss"))
        assert 4.3 <= dss <= 6.5
        assert 0.12 <= nzss <= 0.28
        assert ziss < nzss < dss

    @staticmethod
    def _pooled_se(a: MethodSummary, b: MethodSummary) -> float:
        return math.sqrt(a.std_mse ** 2 / a.effective_R + b.std_mse ** 2 / b.effective_R)

    def test_nzss_improves_as_mean_moves_up(self) -> None:
        config = SimulationConfig(setting=2, replicates=20)
        results = run_sweep(config, "shift", [0.0, 1.0, 2.0, 4.0], ["nzss"], jobs=available_cpus())
        for (_, lower), (_, upper) in zip(results, results[1:]):
            a, b = lower["nzss"], upper["nzss"]
            assert b.mean_mse <= a.mean_mse + self._pooled_se(a, b)

    def test_ziss_degrades_with_overdispersion(self) -> None:
        config = SimulationConfig(setting=1, replicates=20)
        results = run_sweep(config, "overdispersion", [0.0, 0.1, 0.3], ["ziss"], jobs=available_cpus())
        for (_, lower), (_, upper) in zip(results, results[1:]):
            a, b = lower["ziss"], upper["ziss"]
            assert b.mean_mse >= a.mean_mse - self._pooled_se(a, b)
