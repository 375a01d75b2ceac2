"""Tests for the clamped B-spline basis."""

import numpy as np
import numpy.testing as nptest
import pytest
from scipy.interpolate import BSpline

from core.bspline import BSplineBasis, design_matrix, eval_basis, make_clamped_uniform_basis
from core.exceptions import DomainError, InvalidArgumentError

NEGATIVE_TOL = 1e-12


class TestClampedUniformBasis:
    def test_cubic_without_interior_knots(self) -> None:
        basis = make_clamped_uniform_basis(0.0, 1.0, m=4, degree=3)
        nptest.assert_array_equal(basis.knots, [0, 0, 0, 0, 1, 1, 1, 1])
        assert basis.m == 4
        assert basis.interior_knots.size == 0

    def test_single_interior_knot(self) -> None:
        basis = make_clamped_uniform_basis(0.0, 1.0, m=5, degree=3)
        nptest.assert_allclose(basis.interior_knots, [0.5])

    def test_interior_knots_equally_spaced(self) -> None:
        basis = make_clamped_uniform_basis(0.0, 1.0, m=10, degree=3)
        nptest.assert_allclose(basis.interior_knots, np.arange(1, 7) / 7.0, rtol=0, atol=1e-15)

    def test_shifted_interval(self) -> None:
        basis = make_clamped_uniform_basis(2.0, 6.0, m=6, degree=3)
        assert basis.t_min == 2.0 and basis.t_max == 6.0
        nptest.assert_allclose(basis.interior_knots, [10.0 / 3.0, 14.0 / 3.0])

    @pytest.mark.parametrize("m, degree", [(3, 3), (0, 0)])
    def test_too_few_functions(self, m: int, degree: int) -> None:
        with pytest.raises(InvalidArgumentError):
            make_clamped_uniform_basis(0.0, 1.0, m=m, degree=degree)

    def test_empty_interval(self) -> None:
        with pytest.raises(InvalidArgumentError):
            make_clamped_uniform_basis(1.0, 1.0, m=6)

    def test_rejects_unclamped_knots(self) -> None:
        with pytest.raises(InvalidArgumentError):
            BSplineBasis(degree=3, knots=np.array([0, 0, 0, 0.2, 0.5, 1, 1, 1, 1]))

    def test_knots_are_read_only(self) -> None:
        basis = make_clamped_uniform_basis(0.0, 1.0, m=6)
        with pytest.raises(ValueError):
            basis.knots[0] = -1.0


class TestDesignMatrix:
    def test_bernstein_values_at_midpoint(self) -> None:
        basis = make_clamped_uniform_basis(0.0, 1.0, m=4, degree=3)
        nptest.assert_allclose(eval_basis(basis, 0.5), [0.125, 0.375, 0.375, 0.125], rtol=0, atol=1e-15)

    @pytest.mark.parametrize("m", [4, 6, 10])
    def test_endpoints(self, m: int) -> None:
        basis = make_clamped_uniform_basis(0.0, 1.0, m=m)
        left = np.zeros(m)
        left[0] = 1.0
        nptest.assert_allclose(eval_basis(basis, 0.0), left, atol=1e-15)
        nptest.assert_allclose(eval_basis(basis, 1.0), left[::-1], atol=1e-15)

    @pytest.mark.parametrize("m, degree", [(4, 3), (6, 3), (10, 3), (5, 2), (3, 0)])
    def test_partition_of_unity(self, m: int, degree: int) -> None:
        rng = np.random.default_rng(0)
        basis = make_clamped_uniform_basis(0.0, 1.0, m=m, degree=degree)
        values = design_matrix(basis, rng.random(1000))
        nptest.assert_allclose(values.sum(axis=1), 1.0, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("m, degree", [(4, 3), (8, 3), (12, 3), (7, 2)])
    def test_lipschitz_continuity(self, m: int, degree: int) -> None:
        h = 1e-8
        basis = make_clamped_uniform_basis(0.0, 1.0, m=m, degree=degree)
        spacing = np.diff(np.unique(basis.knots)).min()
        t = np.concatenate([np.linspace(0.0, 1.0 - h, 999), basis.interior_knots, basis.interior_knots - h])
        step = np.abs(design_matrix(basis, t + h) - design_matrix(basis, t))
        assert step.max() <= 2.0 * degree / spacing * h

    def test_nonnegativity(self) -> None:
        basis = make_clamped_uniform_basis(0.0, 1.0, m=8)
        values = design_matrix(basis, np.linspace(0.0, 1.0, 401))
        assert np.all(values >= -NEGATIVE_TOL)

    def test_local_support(self) -> None:
        basis = make_clamped_uniform_basis(0.0, 1.0, m=8)
        t = np.linspace(0.0, 1.0, 401)
        values = design_matrix(basis, t)
        knots = basis.knots
        for j in range(basis.m):
            outside = (t < knots[j]) | (t > knots[j + basis.degree + 1])
            nptest.assert_array_equal(values[outside, j], 0.0)

    @pytest.mark.parametrize("m, degree", [(6, 3), (7, 2), (9, 4)])
    def test_matches_scipy_bspline(self, m: int, degree: int) -> None:
        basis = make_clamped_uniform_basis(-1.0, 3.0, m=m, degree=degree)
        t = np.linspace(-1.0, 3.0, 97)[:-1]
        expected = BSpline.design_matrix(t, basis.knots, degree).toarray()
        nptest.assert_allclose(design_matrix(basis, t), expected, rtol=0, atol=1e-13)

    def test_outside_domain(self) -> None:
        basis = make_clamped_uniform_basis(0.0, 1.0, m=6)
        with pytest.raises(DomainError) as excinfo:
            design_matrix(basis, [0.5, 1.0 + 1e-9])
        assert excinfo.value.value == pytest.approx(1.0 + 1e-9)
