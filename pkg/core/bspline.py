"""
B-spline Basis Module

Clamped B-spline bases over the pseudotime interval, evaluated with the
Cox-de Boor recurrence. The dropout curve is a logistic transform of a linear
combination of these basis functions.
"""

from dataclasses import dataclass

import numpy as np

from .constants import DEFAULT_BASIS_DEGREE
from .exceptions import DomainError, InvalidArgumentError


@dataclass(frozen=True)
class BSplineBasis:
    """
    Clamped B-spline basis.

    Attributes:
        degree: Polynomial degree of every basis function
        knots: Non-decreasing knot vector whose first and last values are
            repeated degree + 1 times
    """
    degree: int
    knots: np.ndarray

    def __post_init__(self) -> None:
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        knots.setflags(write=False)

        if self.degree < 0:
            raise InvalidArgumentError(f"degree must be non-negative, got {self.degree}")
        if knots.ndim != 1 or knots.size < 2 * (self.degree + 1):
            raise InvalidArgumentError("knot vector too short for the requested degree")
        if np.any(np.diff(knots) < 0):
            raise InvalidArgumentError("knots must be non-decreasing")
        if not knots[0] < knots[-1]:
            raise InvalidArgumentError("knot vector must span a non-empty interval")
        p = self.degree + 1
        if np.any(knots[:p] != knots[0]) or np.any(knots[-p:] != knots[-1]):
            raise InvalidArgumentError(f"boundary knots must be repeated {p} times")
        if knots[p] == knots[0] or knots[-p - 1] == knots[-1]:
            raise InvalidArgumentError(f"boundary knots must be repeated exactly {p} times")

    @property
    def m(self) -> int:
        """Number of basis functions."""
        return self.knots.size - self.degree - 1

    @property
    def t_min(self) -> float:
        return float(self.knots[0])

    @property
    def t_max(self) -> float:
        return float(self.knots[-1])

    @property
    def interior_knots(self) -> np.ndarray:
        return self.knots[self.degree + 1:self.knots.size - self.degree - 1]


def make_clamped_uniform_basis(
    t_min: float,
    t_max: float,
    m: int,
    degree: int = DEFAULT_BASIS_DEGREE
) -> BSplineBasis:
    """
    Build a clamped basis with equally spaced interior knots.

    Args:
        t_min: Left end of the pseudotime interval
        t_max: Right end of the pseudotime interval
        m: Number of basis functions
        degree: Spline degree

    Returns:
        Basis with m - degree - 1 interior knots

    Raises:
        InvalidArgumentError: If m < degree + 1 or t_min >= t_max

    Example:
        >>> make_clamped_uniform_basis(0.0, 1.0, m=5, degree=3).interior_knots
        array([0.5])
    """
    if degree < 0:
        raise InvalidArgumentError(f"degree must be non-negative, got {degree}")
    if m < degree + 1:
        raise InvalidArgumentError(f"m = {m} is smaller than degree + 1 = {degree + 1}")
    if not t_min < t_max:
        raise InvalidArgumentError(f"empty interval [{t_min}, {t_max}]")

    interior = np.linspace(t_min, t_max, m - degree + 1)[1:-1]
    knots = np.concatenate([
        np.full(degree + 1, float(t_min)),
        interior,
        np.full(degree + 1, float(t_max)),
    ])
    return BSplineBasis(degree=degree, knots=knots)


def design_matrix(basis: BSplineBasis, points) -> np.ndarray:
    """
    Evaluate every basis function at every point.

    Row i holds (b_1(points[i]), ..., b_m(points[i])). The last non-empty knot
    span is closed on the right so that t_max belongs to the domain.

    Raises:
        DomainError: If a point lies outside [t_min, t_max]
    """
    t = np.atleast_1d(np.asarray(points, dtype=float))
    if t.ndim != 1:
        raise InvalidArgumentError("points must be a one-dimensional sequence")
    outside = (t < basis.t_min) | (t > basis.t_max) | ~np.isfinite(t)
    if np.any(outside):
        bad = float(t[outside][0])
        raise DomainError(
            f"point {bad} outside basis domain [{basis.t_min}, {basis.t_max}]",
            value=bad,
        )

    knots = basis.knots
    n_spans = knots.size - 1

    # Degree zero: indicator of the half-open span [u_j, u_{j+1})
    left = knots[:-1][None, :]
    right = knots[1:][None, :]
    values = ((t[:, None] >= left) & (t[:, None] < right)).astype(float)
    last_span = int(np.nonzero(knots[:-1] < knots[1:])[0][-1])
    values[t == basis.t_max, last_span] = 1.0

    for k in range(1, basis.degree + 1):
        count = n_spans - k
        u_j = knots[:count]
        u_jk = knots[k:k + count]
        u_j1 = knots[1:count + 1]
        u_jk1 = knots[k + 1:k + 1 + count]

        # 0/0 terms vanish
        with np.errstate(divide="ignore", invalid="ignore"):
            w_left = np.where(u_jk > u_j, (t[:, None] - u_j) / (u_jk - u_j), 0.0)
            w_right = np.where(u_jk1 > u_j1, (u_jk1 - t[:, None]) / (u_jk1 - u_j1), 0.0)
        values = w_left * values[:, :count] + w_right * values[:, 1:count + 1]

    return values


def eval_basis(basis: BSplineBasis, t: float) -> np.ndarray:
    """Evaluate (b_1(t), ..., b_m(t)) at a single point."""
    return design_matrix(basis, [t])[0]
