"""Tests for the DSS and NZSS baseline fitters."""

import math

import numpy as np
import numpy.testing as nptest
import pytest

from core.baselines import fit_dss, fit_nzss
from core.exceptions import DegenerateDataError
from core.rkhs_spline import LambdaPolicy
from core.simulate import SimulationConfig, generate
from core.ziss_em import BinnedCountData

DOMAIN = (0.0, 1.0)
POLICY = LambdaPolicy(grid_size=7, grid_span=2.0)


def _positive_data(seed: int = 0) -> BinnedCountData:
    rng = np.random.default_rng(seed)
    points = np.linspace(0.05, 0.95, 19)
    counts = 1 + rng.poisson(3.0 + 2.0 * np.sin(6 * points)[:, None], (19, 12))
    return BinnedCountData(points=points, counts=tuple(counts), domain=DOMAIN)


class TestBaselines:
    def test_identical_without_zeros(self) -> None:
        data = _positive_data()
        grid = np.linspace(0.0, 1.0, 101)
        nptest.assert_allclose(fit_nzss(data, POLICY).eta(grid), fit_dss(data, POLICY).eta(grid), rtol=0, atol=1e-10)

    @pytest.mark.parametrize("fit", [fit_dss, fit_nzss])
    def test_constant_counts(self, fit) -> None:
        points = np.linspace(0.1, 0.9, 9)
        data = BinnedCountData(points=points, counts=tuple(np.full((9, 5), 4)), domain=DOMAIN)
        nptest.assert_allclose(fit(data, POLICY).eta(points), math.log(4.0), rtol=0, atol=1e-6)

    def test_nzss_ignores_added_zeros(self) -> None:
        data = _positive_data(1)
        padded_rows = tuple(
            np.concatenate([row, np.zeros(k % 4, dtype=row.dtype)]) for k, row in enumerate(data.counts)
        )
        padded = BinnedCountData(points=data.points, counts=padded_rows, domain=DOMAIN)
        grid = np.linspace(0.0, 1.0, 101)
        nptest.assert_allclose(fit_nzss(padded, POLICY).eta(grid), fit_nzss(data, POLICY).eta(grid), rtol=0, atol=1e-12)

    def test_dss_all_zero(self) -> None:
        data = BinnedCountData(points=[0.2, 0.5], counts=([0, 0], [0, 0]), domain=DOMAIN)
        with pytest.raises(DegenerateDataError):
            fit_dss(data, POLICY)

    def test_nzss_single_positive(self) -> None:
        data = BinnedCountData(points=[0.2, 0.5], counts=([0, 3], [0, 0]), domain=DOMAIN)
        with pytest.raises(DegenerateDataError):
            fit_nzss(data, POLICY)

    def test_nzss_positive_at_one_point(self) -> None:
        data = BinnedCountData(points=[0.2, 0.5], counts=([2, 3], [0, 0]), domain=DOMAIN)
        with pytest.raises(DegenerateDataError):
            fit_nzss(data, POLICY)

    def test_zeros_pull_dss_down_and_push_nzss_up(self) -> None:
        data, truth = generate(SimulationConfig(setting=2, seed=4))
        mu = truth.mu_true(data.points)
        observed = np.array([np.any(row > 0) for row in data.counts])
        low = (mu < 0.5) & observed
        assert np.any(low)
        assert np.all(fit_nzss(data, POLICY).mean(data.points)[low] > mu[low])
        high = mu > 2.0
        assert np.mean(fit_dss(data, POLICY).mean(data.points)[high] < mu[high]) > 0.9
