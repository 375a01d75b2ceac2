"""
Smoothing Spline Module

Cubic smoothing splines in a reproducing kernel Hilbert space. The log-mean
curve is represented as

    eta(t) = d_1 + d_2 (s - 1/2) + sum_i c_i R(s_i, s),   s = rescaled t in [0, 1],

with R the cubic-spline kernel built from scaled Bernoulli polynomials. The
roughness penalty J(eta) = c' Q c vanishes exactly on affine functions.

Working problems are solved through a ridge reparametrization of the kernel
coefficients (c = V L^{-1/2} beta, Q = V L V') and a QR factorization of the
penalty-augmented design, which also yields the smoothing-matrix trace needed
by GCV.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .config import config
from .constants import (
    MAX_REPRESENTER_KNOTS,
    KNOT_SUBSAMPLE_SCALE,
    GRAM_EIGEN_RTOL,
    QR_RANK_RTOL,
    UNIT_INTERVAL_SLACK,
    LAMBDA_INIT_SCALE,
    LAMBDA_INIT_EXPONENT,
    DEFAULT_LAMBDA_GRID_SIZE,
    DEFAULT_LAMBDA_GRID_SPAN,
    DEFAULT_LAMBDA_GRID_EXTENSIONS,
    POISSON_MAX_ITER,
    POISSON_TOL,
    MAX_STEP_HALVINGS,
    MIN_WORKING_MEAN,
)
from .exceptions import (
    ConfigurationError,
    ConvergenceError,
    DegenerateDataError,
    DomainError,
    InvalidArgumentError,
    NumericalError,
    SingularSystemError,
)

Domain = tuple[float, float]


# ============================================================================
# Kernel
# ============================================================================

def _k1(x: np.ndarray) -> np.ndarray:
    return x - 0.5


def _k2(x: np.ndarray) -> np.ndarray:
    k1 = x - 0.5
    return (k1 ** 2 - 1.0 / 12.0) / 2.0


def _k4(x: np.ndarray) -> np.ndarray:
    k1 = x - 0.5
    return (k1 ** 4 - k1 ** 2 / 2.0 + 7.0 / 240.0) / 24.0


def _check_unit(x: np.ndarray) -> np.ndarray:
    if np.any(~np.isfinite(x)) or np.any(x < -UNIT_INTERVAL_SLACK) or np.any(x > 1.0 + UNIT_INTERVAL_SLACK):
        bad = x[~((x >= -UNIT_INTERVAL_SLACK) & (x <= 1.0 + UNIT_INTERVAL_SLACK))]
        value = float(bad.flat[0]) if bad.size else None
        raise DomainError(f"kernel argument {value} outside [0, 1]", value=value)
    return np.clip(x, 0.0, 1.0)


def cubic_kernel(s, u):
    """
    Reproducing kernel of the penalized subspace for J(f) = int_0^1 (f'')^2.

    R(s, u) = k2(s) k2(u) - k4(|s - u|). Broadcasts over array arguments.

    Raises:
        DomainError: If an argument lies outside [0, 1]

    Example:
        >>> cubic_kernel(0.5, 0.5) == 1 / 576 + 1 / 720
        True
    """
    s = _check_unit(np.asarray(s, dtype=float))
    u = _check_unit(np.asarray(u, dtype=float))
    value = _k2(s) * _k2(u) - _k4(np.abs(s - u))
    if np.ndim(value) == 0:
        return float(value)
    return value


def rescale(t, domain: Domain) -> np.ndarray:
    """Map pseudotime affinely from domain onto [0, 1]."""
    lo, hi = domain
    return (np.asarray(t, dtype=float) - lo) / (hi - lo)


def gram_matrix(unit_points) -> np.ndarray:
    """Kernel Gram matrix Q[i, j] = R(u_i, u_j) for points already in [0, 1]."""
    u = np.asarray(unit_points, dtype=float)
    gram = cubic_kernel(u[:, None], u[None, :])
    return (gram + gram.T) / 2.0


def initial_lambda(n_obs: int) -> float:
    """Initial smoothing parameter 10 * n^(-2/9)."""
    if n_obs < 1:
        raise InvalidArgumentError(f"number of observations must be positive, got {n_obs}")
    return LAMBDA_INIT_SCALE * float(n_obs) ** LAMBDA_INIT_EXPONENT


def select_knots(points: np.ndarray, max_knots: int = MAX_REPRESENTER_KNOTS) -> np.ndarray:
    """
    Choose representer knots among sorted distinct points.

    All points are used up to max_knots; beyond that ceil(10 N^(2/9)) points
    are taken uniformly by rank.
    """
    n = points.size
    if n <= max_knots:
        return points
    count = min(n, math.ceil(KNOT_SUBSAMPLE_SCALE * n ** (2.0 / 9.0)))
    idx = np.unique(np.round(np.linspace(0, n - 1, count)).astype(int))
    return points[idx]


# ============================================================================
# Fitted Curve
# ============================================================================

@dataclass(frozen=True)
class SplineMeanCurve:
    """
    Fitted log-mean curve eta with mean mu = exp(eta).

    Attributes:
        knots: Representer knots, strictly increasing, in pseudotime units
        d: Null-space coefficients for {1, s - 1/2}
        c: Kernel coefficients, one per knot
        domain: Pseudotime interval (t_min, t_max)
    """
    knots: np.ndarray
    d: np.ndarray
    c: np.ndarray
    domain: Domain

    def __post_init__(self) -> None:
        knots = np.array(self.knots, dtype=float)
        d = np.array(self.d, dtype=float)
        c = np.array(self.c, dtype=float)
        lo, hi = (float(v) for v in self.domain)
        for name, value in (("knots", knots), ("d", d), ("c", c), ("domain", (lo, hi))):
            object.__setattr__(self, name, value)
        for arr in (knots, d, c):
            arr.setflags(write=False)

        if not lo < hi:
            raise InvalidArgumentError(f"empty domain ({lo}, {hi})")
        if d.shape != (2,):
            raise InvalidArgumentError("d must hold exactly two null-space coefficients")
        if knots.ndim != 1 or c.shape != knots.shape:
            raise InvalidArgumentError("c must hold one coefficient per knot")
        if np.any(np.diff(knots) <= 0):
            raise InvalidArgumentError("knots must be strictly increasing")
        if knots.size and (knots[0] < lo or knots[-1] > hi):
            raise InvalidArgumentError("knots must lie inside the domain")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(c))):
            raise NumericalError("non-finite spline coefficients")

    @classmethod
    def constant(cls, knots, domain: Domain, value: float) -> "SplineMeanCurve":
        """Curve with mu(t) = value everywhere."""
        knots = np.asarray(knots, dtype=float)
        return cls(knots=knots, d=np.array([math.log(value), 0.0]), c=np.zeros(knots.size), domain=domain)

    def eta(self, t) -> np.ndarray:
        """
        Evaluate the log-mean at one or more points.

        Raises:
            DomainError: If a point lies outside the domain
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = self.domain
        outside = (t < lo) | (t > hi) | ~np.isfinite(t)
        if np.any(outside):
            bad = float(t[outside][0])
            raise DomainError(f"point {bad} outside curve domain [{lo}, {hi}]", value=bad)
        s = rescale(t, self.domain)
        u = rescale(self.knots, self.domain)
        return self.d[0] + self.d[1] * _k1(s) + cubic_kernel(s[:, None], u[None, :]) @ self.c

    def mean(self, t) -> np.ndarray:
        """Evaluate mu(t) = exp(eta(t))."""
        return np.exp(self.eta(t))

    def roughness(self) -> float:
        """Penalty J(eta) = c' Q c."""
        u = rescale(self.knots, self.domain)
        return float(self.c @ gram_matrix(u) @ self.c)


# ============================================================================
# Working Least-Squares Problem
# ============================================================================

@dataclass(frozen=True)
class WorkingSolution:
    """Solution of one penalized weighted least-squares problem."""
    d: np.ndarray
    c: np.ndarray
    fitted: np.ndarray
    trace: float


class RepresenterBasis:
    """
    Design quantities for a fixed set of points and representer knots.

    Built once per point set and reused across Newton steps and smoothing
    parameters.
    """

    def __init__(
        self,
        points,
        domain: Optional[Domain] = None,
        max_knots: int = MAX_REPRESENTER_KNOTS
    ) -> None:
        points = np.asarray(points, dtype=float)
        if points.ndim != 1:
            raise InvalidArgumentError("points must be one-dimensional")
        if points.size < 2 or points[0] == points[-1]:
            raise SingularSystemError("at least two distinct points are required")
        if np.any(np.diff(points) <= 0):
            raise InvalidArgumentError("points must be strictly increasing")
        if domain is None:
            domain = (float(points[0]), float(points[-1]))
        lo, hi = float(domain[0]), float(domain[1])
        if not lo < hi:
            raise InvalidArgumentError(f"empty domain ({lo}, {hi})")
        if points[0] < lo or points[-1] > hi:
            raise DomainError(f"points outside domain [{lo}, {hi}]")

        self.points = points
        self.domain: Domain = (lo, hi)
        self.knots = select_knots(points, max_knots)

        s = rescale(points, self.domain)
        u = rescale(self.knots, self.domain)
        self.null_design = np.column_stack([np.ones_like(s), _k1(s)])
        self.kernel_design = cubic_kernel(s[:, None], u[None, :])
        self.gram = gram_matrix(u)

        evals, evecs = linalg.eigh(self.gram)
        keep = evals > GRAM_EIGEN_RTOL * evals.max()
        # c = coef_map @ beta turns c' Q c into ||beta||^2
        self._coef_map = evecs[:, keep] / np.sqrt(evals[keep])
        self._design = np.hstack([self.null_design, self.kernel_design @ self._coef_map])

    @property
    def size(self) -> int:
        return self.points.size

    def linear_predictor(self, d: np.ndarray, c: np.ndarray) -> np.ndarray:
        """eta at the points: S d + R c."""
        return self.null_design @ d + self.kernel_design @ c

    def roughness(self, c: np.ndarray) -> float:
        return float(c @ self.gram @ c)

    def curve(self, d: np.ndarray, c: np.ndarray) -> SplineMeanCurve:
        return SplineMeanCurve(knots=self.knots, d=d, c=c, domain=self.domain)

    def solve(self, weights, response, lam: float) -> WorkingSolution:
        """
        Minimize sum_i w_i (y_i - eta_i)^2 + lam * J(eta).

        Raises:
            InvalidArgumentError: On non-positive weights or lambda
            SingularSystemError: If the null-space design is rank deficient
        """
        w = np.asarray(weights, dtype=float)
        y = np.asarray(response, dtype=float)
        n = self.size
        if w.shape != (n,) or y.shape != (n,):
            raise InvalidArgumentError(f"weights and response must have length {n}")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise InvalidArgumentError("weights must be finite and strictly positive")
        if np.any(~np.isfinite(y)):
            raise NumericalError("non-finite working response")
        if not (math.isfinite(lam) and lam > 0):
            raise InvalidArgumentError(f"lambda must be positive, got {lam}")

        sw = np.sqrt(w)
        r = self._design.shape[1] - 2
        penalty_rows = np.hstack([np.zeros((r, 2)), math.sqrt(lam) * np.eye(r)])
        augmented = np.vstack([sw[:, None] * self._design, penalty_rows])
        rhs = np.concatenate([sw * y, np.zeros(r)])

        q, rfac = linalg.qr(augmented, mode="economic")
        diag = np.abs(np.diag(rfac))
        if not diag.min() > QR_RANK_RTOL * diag.max():
            raise SingularSystemError("penalized least-squares system is rank deficient")

        theta = linalg.solve_triangular(rfac, q.T @ rhs)
        fitted = self._design @ theta
        return WorkingSolution(
            d=theta[:2],
            c=self._coef_map @ theta[2:],
            fitted=fitted,
            trace=float(np.sum(q[:n] ** 2)),
        )


def solve_penalized_wls(
    points,
    weights,
    working_response,
    lam: float,
    domain: Optional[Domain] = None,
    max_knots: int = MAX_REPRESENTER_KNOTS
) -> SplineMeanCurve:
    """
    Solve the penalized weighted least-squares problem for (d, c).

    Args:
        points: Strictly increasing pseudotime points
        weights: Positive weights, one per point
        working_response: Response, one per point
        lam: Smoothing parameter on the rescaled problem
        domain: Pseudotime interval; defaults to (points[0], points[-1])

    Returns:
        Fitted curve minimizing sum w (y - eta)^2 + lam * J(eta)
    """
    basis = RepresenterBasis(points, domain, max_knots)
    solution = basis.solve(weights, working_response, lam)
    return basis.curve(solution.d, solution.c)


# ============================================================================
# Penalized Poisson Likelihood
# ============================================================================

@dataclass(frozen=True)
class PoissonSplineResult:
    """
    Converged penalized Poisson fit together with its final working problem.

    Attributes:
        curve: Fitted log-mean curve
        basis: Representer basis over the positive-weight points
        objectives: Penalized objective at the start and after each accepted step
        iterations: Newton steps taken
        working_weights: w_i mu_i at the converged fit
        working_response: eta_i + (ybar_i - mu_i) / mu_i at the converged fit
    """
    curve: SplineMeanCurve
    basis: RepresenterBasis
    objectives: np.ndarray
    iterations: int
    working_weights: np.ndarray
    working_response: np.ndarray


def poisson_objective(eta, weights, mean_response, roughness: float, lam: float) -> float:
    """sum_i w_i (exp(eta_i) - ybar_i eta_i) + (lam / 2) J(eta)."""
    with np.errstate(over="ignore"):
        mu = np.exp(eta)
    return float(np.sum(weights * (mu - mean_response * eta)) + 0.5 * lam * roughness)


def _working_quantities(eta, weights, mean_response):
    with np.errstate(over="ignore"):
        mu = np.maximum(np.exp(eta), MIN_WORKING_MEAN)
    return weights * mu, eta + (mean_response - mu) / mu


def run_poisson_newton(
    points,
    weights,
    mean_response,
    lam: float,
    domain: Optional[Domain] = None,
    init: Optional[SplineMeanCurve] = None,
    max_iter: int = POISSON_MAX_ITER,
    tol: float = POISSON_TOL,
    max_halvings: int = MAX_STEP_HALVINGS,
    max_knots: int = MAX_REPRESENTER_KNOTS
) -> PoissonSplineResult:
    """
    Minimize sum_i w_i (exp(eta_i) - ybar_i eta_i) + (lam / 2) J(eta) by Newton
    iteration on working responses, halving steps that increase the objective.

    Points with zero weight are removed before fitting. When init has the same
    knots and domain the iteration starts from it, otherwise from the constant
    weighted mean.

    Raises:
        SingularSystemError: If fewer than two points carry positive weight
        DegenerateDataError: If every weighted mean response is zero
        ConvergenceError: If max_iter steps do not reach the tolerance
    """
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    mean_response = np.asarray(mean_response, dtype=float)
    if not (points.shape == weights.shape == mean_response.shape) or points.ndim != 1:
        raise InvalidArgumentError("points, weights and mean_response must have equal length")
    if np.any(~np.isfinite(weights)) or np.any(weights < 0):
        raise InvalidArgumentError("weights must be finite and non-negative")
    if np.any(~np.isfinite(mean_response)) or np.any(mean_response < 0):
        raise InvalidArgumentError("mean responses must be finite and non-negative")

    keep = weights > 0
    if np.count_nonzero(keep) < 2:
        raise SingularSystemError("fewer than two points carry positive weight")
    if domain is None:
        domain = (float(points.min()), float(points.max()))
    w = weights[keep]
    ybar = mean_response[keep]
    overall = float(np.sum(w * ybar) / np.sum(w))
    if overall <= 0:
        raise DegenerateDataError("every weighted mean response is zero")

    basis = RepresenterBasis(points[keep], domain, max_knots)
    if (
        init is not None
        and init.domain == basis.domain
        and np.array_equal(init.knots, basis.knots)
    ):
        d, c = np.array(init.d), np.array(init.c)
    else:
        d, c = np.array([math.log(overall), 0.0]), np.zeros(basis.knots.size)

    eta = basis.linear_predictor(d, c)
    objective = poisson_objective(eta, w, ybar, basis.roughness(c), lam)
    objectives = [objective]
    converged = False
    change = math.inf
    iteration = 0

    for iteration in range(1, max_iter + 1):
        ww, z = _working_quantities(eta, w, ybar)
        solution = basis.solve(ww, z, lam)
        step_d, step_c = solution.d - d, solution.c - c

        accepted = False
        scale = 1.0
        for _ in range(max_halvings + 1):
            d_try, c_try = d + scale * step_d, c + scale * step_c
            eta_try = basis.linear_predictor(d_try, c_try)
            trial = poisson_objective(eta_try, w, ybar, basis.roughness(c_try), lam)
            if math.isfinite(trial) and trial <= objective:
                accepted = True
                break
            scale /= 2.0

        if not accepted:
            # No descent left at working precision
            logging.debug(f"Poisson Newton: step halving exhausted at iteration {iteration}")
            converged = True
            break

        if scale < 1.0:
            logging.debug(f"Poisson Newton: step scaled by {scale:g} at iteration {iteration}")

        change = abs(objective - trial)
        d, c, eta, objective = d_try, c_try, eta_try, trial
        objectives.append(objective)
        if change <= tol * max(1.0, abs(objective)):
            converged = True
            break

    if not converged:
        raise ConvergenceError("penalized Poisson Newton", max_iter, change)

    ww, z = _working_quantities(eta, w, ybar)
    return PoissonSplineResult(
        curve=basis.curve(d, c),
        basis=basis,
        objectives=np.asarray(objectives),
        iterations=iteration,
        working_weights=ww,
        working_response=z,
    )


def fit_poisson_spline(
    points,
    weights,
    mean_response,
    lam: float,
    domain: Optional[Domain] = None,
    init: Optional[SplineMeanCurve] = None,
    **newton_options
) -> SplineMeanCurve:
    """
    Penalized Poisson smoothing spline on the log scale.

    Replicates at a point enter through their total weight w_i and weighted
    mean ybar_i, which are sufficient statistics for the Poisson likelihood.
    """
    return run_poisson_newton(
        points, weights, mean_response, lam, domain=domain, init=init, **newton_options
    ).curve


# ============================================================================
# Smoothing Parameter Selection
# ============================================================================

def gcv_score(result: PoissonSplineResult, lam: float) -> tuple[float, float]:
    """
    GCV score of the converged working problem and its smoothing-matrix trace.

    V = n^-1 sum_i ww_i (z_i - zhat_i)^2 / (1 - tr A / n)^2
    """
    solution = result.basis.solve(result.working_weights, result.working_response, lam)
    n = result.basis.size
    rss = float(np.sum(result.working_weights * (result.working_response - solution.fitted) ** 2))
    denominator = (1.0 - solution.trace / n) ** 2
    if denominator <= 0:
        return math.inf, solution.trace
    return (rss / n) / denominator, solution.trace


def _check_grid(lambda_grid) -> np.ndarray:
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidArgumentError("lambda grid must be a non-empty sequence")
    if np.any(~np.isfinite(grid)) or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise InvalidArgumentError("lambda grid must be positive and increasing")
    return grid


def _gcv_scores(
    points,
    weights,
    mean_response,
    grid: np.ndarray,
    domain: Optional[Domain],
    **newton_options
) -> tuple[np.ndarray, Optional[NumericalError]]:
    """Score every grid value; failed fits score inf."""
    scores = np.full(grid.size, math.inf)
    previous: Optional[SplineMeanCurve] = None
    last_error: Optional[NumericalError] = None
    for k, lam in enumerate(grid):
        try:
            result = run_poisson_newton(
                points, weights, mean_response, float(lam),
                domain=domain, init=previous, **newton_options
            )
        except NumericalError as e:
            logging.warning(f"GCV: fit failed at lambda={lam:.4g}: {e}")
            last_error = e
            continue
        previous = result.curve
        scores[k], trace = gcv_score(result, float(lam))
        logging.debug(f"GCV: lambda={lam:.4g} score={scores[k]:.6g} trace={trace:.3f}")
    return scores, last_error


def _edge(scores: np.ndarray) -> Optional[str]:
    """'lower' or 'upper' when the minimizer sits on that end of a multi-value grid."""
    if scores.size < 2:
        return None
    best = int(np.argmin(scores))
    if best == 0:
        return "lower"
    if best == scores.size - 1:
        return "upper"
    return None


def gcv_select_lambda(
    points,
    weights,
    mean_response,
    lambda_grid,
    domain: Optional[Domain] = None,
    warn_at_edge: bool = True,
    **newton_options
) -> tuple[float, np.ndarray]:
    """
    Choose lambda on a grid by generalized cross-validation.

    A minimizer on either end of the grid is returned as is, with a warning
    unless warn_at_edge is False; select_lambda grows the grid past such an
    edge instead.

    Returns:
        Tuple of (grid minimizer, GCV score per grid value)

    Raises:
        InvalidArgumentError: If the grid is empty, non-positive or not increasing
        NumericalError: If the fit fails at every grid value
    """
    grid = _check_grid(lambda_grid)
    scores, last_error = _gcv_scores(points, weights, mean_response, grid, domain, **newton_options)
    if not np.any(np.isfinite(scores)):
        raise NumericalError(f"GCV: every fit on the lambda grid failed ({last_error})")

    best = int(np.argmin(scores))
    edge = _edge(scores)
    if edge is not None and warn_at_edge:
        logging.warning(
            f"GCV minimum at the {edge} grid edge lambda={grid[best]:.4g}; "
            f"the optimum may lie outside [{grid[0]:.4g}, {grid[-1]:.4g}]"
        )
    logging.debug(f"GCV selected lambda={grid[best]:.4g}")
    return float(grid[best]), scores


@dataclass(frozen=True)
class GcvSelection:
    """
    Outcome of select_lambda.

    Attributes:
        lam: Grid minimizer
        grid: Every lambda scored, increasing; includes any extension
        scores: GCV score per grid value
        at_edge: Whether the minimizer still sits on an end of the grid
    """
    lam: float
    grid: np.ndarray
    scores: np.ndarray
    at_edge: bool


def _extension(grid: np.ndarray, edge: str, n_points: int) -> np.ndarray:
    log_grid = np.log10(grid)
    step = float(np.mean(np.diff(log_grid)))
    offsets = step * np.arange(1, n_points + 1)
    if edge == "lower":
        return 10.0 ** (log_grid[0] - offsets[::-1])
    return 10.0 ** (log_grid[-1] + offsets)


def select_lambda(
    points,
    weights,
    mean_response,
    n_obs: int,
    policy: "LambdaPolicy",
    domain: Optional[Domain] = None,
    **newton_options
) -> GcvSelection:
    """
    GCV over the policy grid, growing the grid while the minimizer is on an edge.

    Each extension adds half a grid beyond the edge at the same log spacing,
    at most policy.max_extensions times.

    Raises:
        NumericalError: If the fit fails at every grid value
    """
    grid = policy.grid(n_obs)
    _, scores = gcv_select_lambda(
        points, weights, mean_response, grid, domain=domain, warn_at_edge=False, **newton_options
    )

    extend_by = max(1, (grid.size - 1) // 2)
    for _ in range(policy.max_extensions):
        edge = _edge(scores)
        if edge is None:
            break
        extra = _extension(grid, edge, extend_by)
        logging.info(
            f"GCV minimum at the {edge} grid edge; extending to "
            f"[{min(extra[0], grid[0]):.4g}, {max(extra[-1], grid[-1]):.4g}]"
        )
        extra_scores, _ = _gcv_scores(points, weights, mean_response, extra, domain, **newton_options)
        if edge == "lower":
            grid, scores = np.concatenate([extra, grid]), np.concatenate([extra_scores, scores])
        else:
            grid, scores = np.concatenate([grid, extra]), np.concatenate([scores, extra_scores])

    best = int(np.argmin(scores))
    at_edge = _edge(scores) is not None
    if at_edge:
        logging.warning(
            f"GCV minimum at the grid edge lambda={grid[best]:.4g} after "
            f"{policy.max_extensions} extension(s)"
        )
    return GcvSelection(float(grid[best]), grid, scores, at_edge)


@dataclass(frozen=True)
class LambdaPolicy:
    """
    How the smoothing parameter is chosen.

    Attributes:
        mode: 'gcv' to select on a log-spaced grid, 'fixed' to use one value
        value: Fixed lambda; None means lambda_init = 10 n^(-2/9)
        grid_size: Number of grid values in 'gcv' mode
        grid_span: Grid spans lambda_init * 10^(+/- grid_span)
        max_extensions: Half-grids added past an edge that holds the GCV minimizer
    """
    mode: str = "gcv"
    value: Optional[float] = None
    grid_size: int = DEFAULT_LAMBDA_GRID_SIZE
    grid_span: float = DEFAULT_LAMBDA_GRID_SPAN
    max_extensions: int = DEFAULT_LAMBDA_GRID_EXTENSIONS

    def __post_init__(self) -> None:
        if self.mode not in ("gcv", "fixed"):
            raise InvalidArgumentError(f"lambda policy mode must be 'gcv' or 'fixed', got {self.mode!r}")
        if self.value is not None and not self.value > 0:
            raise InvalidArgumentError(f"fixed lambda must be positive, got {self.value}")
        if self.grid_size < 1 or self.grid_span < 0:
            raise InvalidArgumentError("lambda grid needs a positive size and a non-negative span")
        if self.max_extensions < 0:
            raise InvalidArgumentError(f"grid extensions must be non-negative, got {self.max_extensions}")

    @classmethod
    def from_config(cls, **overrides) -> "LambdaPolicy":
        """Policy from the 'ziss' section of the configuration; keyword arguments win."""
        values = {
            "mode": config.get("ziss.lambda_policy", "gcv"),
            "grid_size": int(config.get("ziss.lambda_grid_size", DEFAULT_LAMBDA_GRID_SIZE)),
            "grid_span": float(config.get("ziss.lambda_grid_span", DEFAULT_LAMBDA_GRID_SPAN)),
            "max_extensions": int(config.get("ziss.lambda_grid_extensions", DEFAULT_LAMBDA_GRID_EXTENSIONS)),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**values)
        except InvalidArgumentError as e:
            raise ConfigurationError("ziss.lambda_policy", str(e)) from e

    def initial(self, n_obs: int) -> float:
        """Lambda used during EM iterations and in 'fixed' mode."""
        return self.value if self.value is not None else initial_lambda(n_obs)

    def grid(self, n_obs: int) -> np.ndarray:
        """Log-spaced GCV grid around lambda_init."""
        center = math.log10(initial_lambda(n_obs))
        if self.grid_size == 1:
            return np.array([10.0 ** center])
        return np.logspace(center - self.grid_span, center + self.grid_span, self.grid_size)


def fit_with_policy(
    points,
    weights,
    mean_response,
    n_obs: int,
    policy: LambdaPolicy,
    domain: Optional[Domain] = None,
    **newton_options
) -> tuple[SplineMeanCurve, float]:
    """
    Fit a penalized Poisson spline with lambda chosen by policy.

    Args:
        n_obs: Number of raw observations behind the weights (sets lambda_init)

    Returns:
        Tuple of (fitted curve, lambda used)
    """
    if policy.mode == "gcv":
        lam = select_lambda(
            points, weights, mean_response, n_obs, policy, domain=domain, **newton_options
        ).lam
    else:
        lam = policy.initial(n_obs)
    curve = fit_poisson_spline(points, weights, mean_response, lam, domain=domain, **newton_options)
    return curve, lam
