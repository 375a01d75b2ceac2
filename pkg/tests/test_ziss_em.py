"""Tests for the ZISS EM estimator."""

import math

import numpy as np
import numpy.testing as nptest
import pytest
from scipy import optimize, stats
from scipy.special import expit

from core.baselines import fit_dss, fit_nzss
from core.bspline import make_clamped_uniform_basis
from core.exceptions import DataValidationError, DegenerateDataError
from core.rkhs_spline import LambdaPolicy, SplineMeanCurve, fit_poisson_spline
from core.simulate import GroundTruth, SimulationConfig, generate, mu_setting1
from core.ziss_em import (
    BinnedCountData,
    DropoutCurve,
    Responsibilities,
    ZissConfig,
    dropout_objective_grad_hess,
    e_step,
    em_cycle,
    fit_ziss,
    m_step_dropout,
    m_step_mean,
    observed_nll,
    penalized_nll,
)

DOMAIN = (0.0, 1.0)


def _dense_data(n_points: int = 20, n_per_point: int = 30, seed: int = 0) -> BinnedCountData:
    rng = np.random.default_rng(seed)
    points = np.linspace(0.025, 0.975, n_points)
    counts = rng.poisson(2.0, (n_points, n_per_point))
    counts[rng.random(counts.shape) < 0.3] = 0
    return BinnedCountData(points=points, counts=tuple(counts), domain=DOMAIN)


def _constant_q(data: BinnedCountData, value: float) -> Responsibilities:
    return Responsibilities(q=tuple(np.full(row.size, value) for row in data.counts))


class TestBinnedCountData:
    def test_counts_and_totals(self) -> None:
        data = BinnedCountData(points=[0.2, 0.5], counts=([0, 3], [1, 1, 2]), domain=DOMAIN)
        nptest.assert_array_equal(data.replicates, [2, 3])
        assert data.n_obs == 5
        nptest.assert_array_equal(data.totals(), [3.0, 4.0])
        nptest.assert_array_equal(data.flat_index, [0, 0, 1, 1, 1])

    def test_from_observations_groups_by_pseudotime(self) -> None:
        data = BinnedCountData.from_observations([0.5, 0.2, 0.5, 0.2], [1, 0, 4, 2], DOMAIN)
        nptest.assert_array_equal(data.points, [0.2, 0.5])
        nptest.assert_array_equal(data.counts[0], [0, 2])
        nptest.assert_array_equal(data.counts[1], [1, 4])

    @pytest.mark.parametrize(
        "points, counts",
        [
            ([0.2, 0.5], ([0, -1], [1])),
            ([0.2, 0.5], ([0, 1.5], [1])),
            ([0.5, 0.2], ([0, 1], [1])),
            ([0.0, 0.5], ([0, 1], [1])),
            ([0.2, 0.5], ([0, 1],)),
        ],
    )
    def test_rejects_malformed_data(self, points, counts) -> None:
        with pytest.raises(DataValidationError):
            BinnedCountData(points=points, counts=counts, domain=DOMAIN)

    def test_positive_only_drops_empty_points(self) -> None:
        data = BinnedCountData(points=[0.2, 0.5, 0.8], counts=([0, 3], [0, 0], [2, 0, 1]), domain=DOMAIN)
        positive = data.positive_only()
        nptest.assert_array_equal(positive.points, [0.2, 0.8])
        nptest.assert_array_equal(positive.counts[1], [2, 1])

    def test_positive_only_needs_two_positives(self) -> None:
        data = BinnedCountData(points=[0.2, 0.5], counts=([0, 3], [0, 0]), domain=DOMAIN)
        with pytest.raises(DegenerateDataError):
            data.positive_only()


def _membership_at(counts, mu: float, p: float) -> np.ndarray:
    """Responsibilities of counts observed at one point under constant curves."""
    data = BinnedCountData(points=[0.5], counts=(counts,), domain=DOMAIN)
    basis = make_clamped_uniform_basis(*DOMAIN, m=6)
    mean_curve = SplineMeanCurve.constant(data.points, DOMAIN, mu)
    return e_step(data, mean_curve, DropoutCurve.constant(basis, p)).flat


class TestEStep:
    @pytest.mark.parametrize(
        "y, mu, p, expected",
        [
            (3, 1.7, 0.2, 1.0),
            (0, math.log(2.0), 0.5, 1.0 / 3.0),
            (0, math.log(3.0), 0.75, 0.5),
        ],
    )
    def test_examples(self, y, mu, p, expected) -> None:
        q = _membership_at([y, y], mu, p)
        nptest.assert_allclose(q, expected, rtol=1e-12)

    def test_matches_bayes_rule(self) -> None:
        y = np.arange(4)
        for mu in (0.1, 1.0, 5.0):
            for p in (0.1, 0.5, 0.9):
                pois = p * stats.poisson.pmf(y, mu)
                expected = pois / (pois + (1 - p) * (y == 0))
                q = _membership_at(y, mu, p)
                assert np.max(np.abs(q - expected)) <= 1e-12

    def test_e_step_under_constant_curves(self) -> None:
        data = _dense_data()
        basis = make_clamped_uniform_basis(*DOMAIN, m=6)
        q = e_step(data, SplineMeanCurve.constant(data.points, DOMAIN, 2.0), DropoutCurve.constant(basis, 0.6))
        zero_q = 0.6 * math.exp(-2.0) / (0.6 * math.exp(-2.0) + 0.4)
        y = data.flat_counts
        nptest.assert_allclose(q.flat[y == 0], zero_q, rtol=1e-12)
        nptest.assert_array_equal(q.flat[y > 0], 1.0)


class TestDropoutStep:
    def test_gradient_vanishes_when_q_equals_p(self) -> None:
        data = _dense_data()
        basis = make_clamped_uniform_basis(*DOMAIN, m=6)
        alpha = np.array([0.5, -0.3, 0.2, 1.0, -0.8, 0.1])
        p = DropoutCurve(basis=basis, alpha=alpha).poisson_prob(data.points)
        q = Responsibilities(q=tuple(np.full(row.size, p_i) for row, p_i in zip(data.counts, p)))
        _, grad, _ = dropout_objective_grad_hess(data, q, basis, alpha)
        nptest.assert_allclose(grad, 0.0, atol=1e-10)

    def test_gradient_and_hessian_match_finite_differences(self) -> None:
        data = _dense_data()
        basis = make_clamped_uniform_basis(*DOMAIN, m=6)
        rng = np.random.default_rng(1)
        q = Responsibilities.from_flat(data, rng.random(data.n_obs))
        step = 1e-6
        for _ in range(20):
            alpha = rng.normal(0.0, 1.5, basis.m)
            _, grad, hess = dropout_objective_grad_hess(data, q, basis, alpha)
            fd_grad = np.empty(basis.m)
            fd_hess = np.empty((basis.m, basis.m))
            for k in range(basis.m):
                e = np.zeros(basis.m)
                e[k] = step
                up = dropout_objective_grad_hess(data, q, basis, alpha + e)
                down = dropout_objective_grad_hess(data, q, basis, alpha - e)
                fd_grad[k] = (up[0] - down[0]) / (2 * step)
                fd_hess[:, k] = (up[1] - down[1]) / (2 * step)
            assert np.max(np.abs(grad - fd_grad)) <= 1e-5 * max(1.0, np.max(np.abs(grad)))
            assert np.max(np.abs(hess - fd_hess)) <= 1e-4 * max(1.0, np.max(np.abs(hess)))

    def test_constant_responsibility_gives_constant_probability(self) -> None:
        data = _dense_data()
        basis = make_clamped_uniform_basis(*DOMAIN, m=6)
        curve = m_step_dropout(data, _constant_q(data, 0.7), basis, np.zeros(basis.m))
        nptest.assert_allclose(curve.poisson_prob(data.points), 0.7, atol=1e-4)

    def test_full_responsibility_drives_dropout_to_zero(self) -> None:
        data = _dense_data()
        basis = make_clamped_uniform_basis(*DOMAIN, m=6)
        curve = m_step_dropout(data, _constant_q(data, 1.0), basis, np.zeros(basis.m))
        assert np.all(curve.poisson_prob(data.points) >= 1 - 1e-4)

    def test_matches_generic_optimizer(self) -> None:
        data = _dense_data()
        basis = make_clamped_uniform_basis(*DOMAIN, m=6)
        rng = np.random.default_rng(2)
        q = Responsibilities.from_flat(data, np.where(data.flat_counts > 0, 1.0, rng.random(data.n_obs)))

        def negated(alpha):
            value, grad, hess = dropout_objective_grad_hess(data, q, basis, alpha)
            return -value, -grad, -hess

        oracle = optimize.minimize(
            lambda a: negated(a)[0],
            np.zeros(basis.m),
            jac=lambda a: negated(a)[1],
            hess=lambda a: negated(a)[2],
            method="trust-exact",
            options={"gtol": 1e-10},
        )
        curve = m_step_dropout(data, q, basis, np.zeros(basis.m))
        expected = expit(-(DropoutCurve(basis=basis, alpha=oracle.x).linear_predictor(data.points)))
        nptest.assert_allclose(curve.poisson_prob(data.points), expected, rtol=0, atol=1e-6)


class TestMeanStep:
    def test_full_responsibility_equals_all_count_fit(self, small_data) -> None:
        lam = 0.05
        curve = m_step_mean(small_data, _constant_q(small_data, 1.0), lam)
        m_i = small_data.replicates.astype(float)
        direct = fit_poisson_spline(
            small_data.points, m_i, small_data.totals() / m_i, lam, domain=small_data.domain
        )
        nptest.assert_allclose(curve.eta(small_data.points), direct.eta(small_data.points), rtol=0, atol=1e-12)

    def test_full_responsibility_equals_dss_with_fixed_lambda(self, small_data) -> None:
        policy = LambdaPolicy(mode="fixed", value=0.05)
        curve = m_step_mean(small_data, _constant_q(small_data, 1.0), 0.05)
        dss = fit_dss(small_data, policy)
        nptest.assert_allclose(curve.eta(small_data.points), dss.eta(small_data.points), rtol=0, atol=1e-10)

    def test_zero_responsibility_on_zeros_equals_nzss(self, small_data) -> None:
        q = Responsibilities(q=tuple((row > 0).astype(float) for row in small_data.counts))
        curve = m_step_mean(small_data, q, 0.05)
        nzss = fit_nzss(small_data, LambdaPolicy(mode="fixed", value=0.05))
        grid = np.linspace(0.0, 1.0, 101)
        nptest.assert_allclose(curve.eta(grid), nzss.eta(grid), rtol=0, atol=1e-10)

    def test_halving_weights_and_lambda_together(self, small_data) -> None:
        rng = np.random.default_rng(3)
        flat = np.where(small_data.flat_counts > 0, 1.0, rng.random(small_data.n_obs))
        q = Responsibilities.from_flat(small_data, flat)
        half = Responsibilities.from_flat(small_data, flat / 2)
        full = m_step_mean(small_data, q, 0.1)
        halved = m_step_mean(small_data, half, 0.05)
        nptest.assert_allclose(full.eta(small_data.points), halved.eta(small_data.points), rtol=0, atol=1e-6)


class TestObservedNLL:
    def test_even_mixture_of_zero(self) -> None:
        assert abs(observed_nll([0], 0.0, 0.5)) <= 1e-15

    def test_reduces_to_poisson(self) -> None:
        y = np.array([0, 1, 4, 2, 7])
        mu = np.array([0.5, 1.0, 3.0, 2.2, 6.0])
        assert observed_nll(y, mu, 1.0) == pytest.approx(-stats.poisson.logpmf(y, mu).sum(), rel=1e-12)

    def test_brute_force(self) -> None:
        y = np.array([0, 0, 2, 5, 1])
        mu = np.array([0.3, 2.0, 1.5, 4.0, 0.8])
        p = np.array([0.9, 0.4, 0.7, 0.2, 0.55])
        density = p * stats.poisson.pmf(y, mu) + (1 - p) * (y == 0)
        assert observed_nll(y, mu, p) == pytest.approx(-np.log(density).sum(), rel=1e-12)


class TestFitZiss:
    def test_all_zero_counts(self) -> None:
        data = BinnedCountData(points=[0.2, 0.5], counts=([0, 0], [0, 0, 0]), domain=DOMAIN)
        with pytest.raises(DegenerateDataError):
            fit_ziss(data)

    def test_without_excess_zeros_matches_direct_fit(self, fast_settings) -> None:
        truth = GroundTruth(mu_true=lambda t: mu_setting1(t) + 3.0, p_zero_true=lambda t: np.zeros_like(t))
        data, _ = generate(SimulationConfig(seed=5), truth)
        fit = fit_ziss(data, fast_settings)
        assert np.all(fit.dropout.poisson_prob(data.points) >= 0.95)
        direct = fit_dss(data, fast_settings.lambda_policy, **fast_settings.poisson_options())
        ratio = fit.mean(data.points) / direct.mean(data.points)
        assert np.max(np.abs(ratio - 1.0)) <= 0.02

    @pytest.mark.parametrize("fixture_name", ["setting1_data", "setting2_data"])
    def test_penalized_nll_trace_non_increasing(self, fixture_name, fixed_settings, request) -> None:
        data, _ = request.getfixturevalue(fixture_name)
        fit = fit_ziss(data, fixed_settings)
        assert fit.trace.size == fit.iterations + 1
        assert np.all(np.diff(fit.trace) <= 1e-8 * (1.0 + np.abs(fit.trace[:-1])))

    def test_penalized_nll_matches_curves(self, small_data, fixed_settings) -> None:
        fit = fit_ziss(small_data, fixed_settings)
        y = small_data.flat_counts
        idx = small_data.flat_index
        mu = fit.mean(small_data.points)[idx]
        p = fit.dropout.poisson_prob(small_data.points)[idx]
        expected = observed_nll(y, mu, p) + 0.5 * fit.lam * fit.mean_curve.roughness()
        assert penalized_nll(small_data, fit) == pytest.approx(expected, rel=1e-10)
        assert fit.trace[-1] == pytest.approx(expected, rel=1e-10)

    @pytest.mark.parametrize("settings_name", ["fixed_settings", "fast_settings"])
    def test_converged_fit_is_a_fixed_point(self, setting1_data, settings_name, request) -> None:
        data, _ = setting1_data
        settings = request.getfixturevalue(settings_name)
        fit = fit_ziss(data, settings)
        assert fit.converged
        _, mean_curve, _ = em_cycle(data, fit.mean_curve, fit.dropout, fit.lam, settings)
        old = fit.mean(data.points)
        change = np.linalg.norm(mean_curve.mean(data.points) - old) / (1 + np.linalg.norm(old))
        assert change <= settings.epsilon

    def test_selected_lambda_is_refitted(self, setting1_data, fast_settings) -> None:
        data, _ = setting1_data
        fit = fit_ziss(data, fast_settings)
        assert fit.trace[-1] == pytest.approx(penalized_nll(data, fit), rel=1e-10)
        assert np.all(np.diff(fit.trace) <= 1e-8 * (1.0 + np.abs(fit.trace[:-1])))
        assert fit.iterations >= fit.trace.size - 1

    def test_responsibilities_and_probabilities_in_range(self, setting2_data, fast_settings) -> None:
        data, _ = setting2_data
        fit = fit_ziss(data, fast_settings)
        q = fit.responsibilities.flat
        y = data.flat_counts
        assert np.all((q >= 0) & (q <= 1))
        nptest.assert_array_equal(q[y > 0], 1.0)
        grid = np.linspace(0.0, 1.0, 201)
        dropout = fit.dropout_prob(grid)
        assert np.all((dropout > 0) & (dropout < 1))
        base = fast_settings.lambda_policy.grid(data.n_obs)
        assert fit.gcv_scores is not None and fit.gcv_scores.shape == fit.gcv_grid.shape
        assert fit.gcv_grid.size >= base.size
        assert np.isclose(fit.gcv_grid, base[0]).any() and np.isclose(fit.gcv_grid, base[-1]).any()
        assert fit.lam in fit.gcv_grid

    def test_fixed_policy_keeps_initial_lambda(self, small_data, fixed_settings) -> None:
        fit = fit_ziss(small_data, fixed_settings)
        assert fit.lam == pytest.approx(fixed_settings.lambda_policy.initial(small_data.n_obs))
        assert fit.gcv_scores is None and fit.gcv_grid is None

    def test_iteration_cap_reports_non_convergence(self, small_data) -> None:
        settings = ZissConfig(max_iter=1, lambda_policy=LambdaPolicy(mode="fixed"))
        fit = fit_ziss(small_data, settings)
        assert not fit.converged
        assert fit.iterations == 1


class TestZissConfig:
    def test_dict_round_trip(self) -> None:
        settings = ZissConfig(basis_m=8, epsilon=1e-5, lambda_policy=LambdaPolicy(mode="fixed", value=0.2))
        assert ZissConfig.from_dict(settings.to_dict()) == settings

    def test_overrides_win_over_configuration(self) -> None:
        settings = ZissConfig.from_config(basis_m=9, epsilon=None)
        assert settings.basis_m == 9
        assert settings.epsilon == 1e-4
