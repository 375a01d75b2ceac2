"""
ZISS Estimator Module

EM fitting of the zero-inflated Poisson model

    y ~ p(t) Poisson(mu(t)) + (1 - p(t)) delta_0,

where mu(t) = exp(eta(t)) is a cubic smoothing spline and p(t) is a logistic
B-spline curve. Internally p(t) is the probability of the Poisson component;
the dropout probability reported to users is 1 - p(t).

Each EM iteration computes the posterior Poisson membership of every zero,
then solves two separate M-step problems: a damped Newton ascent for the
dropout coefficients and a penalized Poisson Newton iteration for the mean.
The loop first runs at lambda_init; under the GCV policy lambda is then
selected on the working data of that fit and the loop is run again at the
selected value.
"""

import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.special import expit, gammaln, log_expit, logit, xlogy

from .bspline import BSplineBasis, design_matrix, make_clamped_uniform_basis
from .config import config
from .constants import (
    DEFAULT_BASIS_M,
    DEFAULT_BASIS_DEGREE,
    DEFAULT_EPSILON,
    DEFAULT_EM_MAX_ITER,
    DROPOUT_MAX_ITER,
    DROPOUT_TOL,
    POISSON_MAX_ITER,
    POISSON_TOL,
    MAX_STEP_HALVINGS,
    MAX_REPRESENTER_KNOTS,
    HESSIAN_RIDGE,
    OBJECTIVE_SLACK,
    FALLBACK_INITIAL_MEAN,
    INITIAL_ZERO_RESPONSIBILITY,
    INITIAL_PROB_CLIP,
)
from .exceptions import (
    ConfigurationError,
    ConvergenceError,
    DataValidationError,
    DegenerateDataError,
    IllConditionedError,
    InvalidArgumentError,
    NumericalError,
)
from .rkhs_spline import (
    Domain,
    LambdaPolicy,
    SplineMeanCurve,
    fit_poisson_spline,
    select_lambda,
)


# ============================================================================
# Data
# ============================================================================

def _as_count_row(row, index: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(row))
    if arr.ndim != 1 or arr.size == 0:
        raise DataValidationError(f"point {index} has no observations")
    if not np.issubdtype(arr.dtype, np.number) or np.issubdtype(arr.dtype, np.complexfloating):
        raise DataValidationError(f"point {index} holds non-numeric counts")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr != np.round(arr)):
        raise DataValidationError(f"point {index} holds counts that are not non-negative integers")
    out = arr.astype(np.int64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BinnedCountData:
    """
    Counts observed at N pseudotime points.

    Attributes:
        points: Strictly increasing pseudotime points inside the open domain
        counts: One integer array of replicate counts per point
        domain: Pseudotime interval (t_min, t_max)
    """
    points: np.ndarray
    counts: tuple[np.ndarray, ...]
    domain: Domain

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 1 or points.size == 0:
            raise DataValidationError("points must be a non-empty one-dimensional sequence")
        if len(self.counts) != points.size:
            raise DataValidationError(
                f"{points.size} points but {len(self.counts)} count rows"
            )
        if np.any(~np.isfinite(points)) or np.any(np.diff(points) <= 0):
            raise DataValidationError("points must be finite and strictly increasing")
        lo, hi = float(self.domain[0]), float(self.domain[1])
        if not (lo < points[0] and points[-1] < hi):
            raise DataValidationError(
                f"points must lie strictly inside the domain ({lo}, {hi})"
            )
        counts = tuple(_as_count_row(row, i) for i, row in enumerate(self.counts))
        if sum(row.size for row in counts) < 2:
            raise DataValidationError("at least two observations are required")

        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "domain", (lo, hi))

    @classmethod
    def from_observations(cls, pseudotime, counts, domain: Domain) -> "BinnedCountData":
        """Group flat (t, y) observations by identical pseudotime."""
        pseudotime = np.asarray(pseudotime, dtype=float)
        counts = np.asarray(counts)
        if pseudotime.shape != counts.shape or pseudotime.ndim != 1:
            raise DataValidationError("pseudotime and counts must be equal-length sequences")
        points, inverse = np.unique(pseudotime, return_inverse=True)
        rows = tuple(counts[inverse == k] for k in range(points.size))
        return cls(points=points, counts=rows, domain=domain)

    @property
    def n_points(self) -> int:
        return self.points.size

    @property
    def replicates(self) -> np.ndarray:
        """M_i, the number of observations at each point."""
        return np.array([row.size for row in self.counts])

    @property
    def n_obs(self) -> int:
        """Total number of observations n."""
        return int(self.replicates.sum())

    @property
    def flat_counts(self) -> np.ndarray:
        return np.concatenate(self.counts)

    @property
    def flat_index(self) -> np.ndarray:
        """Point index of every entry of flat_counts."""
        return np.repeat(np.arange(self.n_points), self.replicates)

    def totals(self) -> np.ndarray:
        """Per-point sum of counts."""
        return np.array([row.sum() for row in self.counts], dtype=float)

    def positive_only(self) -> "BinnedCountData":
        """
        Keep strictly positive counts and drop points left without any.

        Raises:
            DegenerateDataError: If fewer than two positive counts remain
        """
        keep = [k for k, row in enumerate(self.counts) if np.any(row > 0)]
        rows = tuple(self.counts[k][self.counts[k] > 0] for k in keep)
        if sum(row.size for row in rows) < 2:
            raise DegenerateDataError("fewer than two positive counts")
        return BinnedCountData(points=self.points[keep], counts=rows, domain=self.domain)


# ============================================================================
# Dropout Curve and Responsibilities
# ============================================================================

@dataclass(frozen=True)
class DropoutCurve:
    """
    Logistic B-spline curve p(t) = 1 / (1 + exp(sum_l alpha_l b_l(t))).

    p(t) is the Poisson-component probability; dropout(t) = 1 - p(t).
    """
    basis: BSplineBasis
    alpha: np.ndarray

    def __post_init__(self) -> None:
        alpha = np.array(self.alpha, dtype=float)
        if alpha.shape != (self.basis.m,):
            raise InvalidArgumentError(
                f"alpha must have {self.basis.m} coefficients, got shape {alpha.shape}"
            )
        if np.any(~np.isfinite(alpha)):
            raise NumericalError("non-finite dropout coefficients")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def constant(cls, basis: BSplineBasis, poisson_prob: float) -> "DropoutCurve":
        """Curve with p(t) = poisson_prob everywhere (bases sum to one)."""
        return cls(basis=basis, alpha=np.full(basis.m, -logit(poisson_prob)))

    def linear_predictor(self, t) -> np.ndarray:
        return design_matrix(self.basis, t) @ self.alpha

    def poisson_prob(self, t) -> np.ndarray:
        return expit(-self.linear_predictor(t))

    def dropout(self, t) -> np.ndarray:
        return expit(self.linear_predictor(t))


@dataclass(frozen=True)
class Responsibilities:
    """Posterior Poisson membership q of every observation, laid out like the counts."""
    q: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        rows = tuple(np.asarray(row, dtype=float) for row in self.q)
        for row in rows:
            if np.any(~np.isfinite(row)) or np.any(row < 0) or np.any(row > 1):
                raise NumericalError("responsibilities must lie in [0, 1]")
            row.setflags(write=False)
        object.__setattr__(self, "q", rows)

    @classmethod
    def from_flat(cls, data: BinnedCountData, flat: np.ndarray) -> "Responsibilities":
        bounds = np.cumsum(data.replicates)[:-1]
        return cls(q=tuple(np.split(np.asarray(flat, dtype=float), bounds)))

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate(self.q)

    def totals(self) -> np.ndarray:
        """Per-point sum of q."""
        return np.array([row.sum() for row in self.q])


# ============================================================================
# E-step
# ============================================================================

def e_step(data: BinnedCountData, mu_hat: SplineMeanCurve, p_hat: DropoutCurve) -> Responsibilities:
    """
    Posterior probability that each observation came from the Poisson component.

    q = 1 for y > 0; for y = 0, q = p e^{-mu} / (p e^{-mu} + 1 - p), computed
    as expit(logit(p) - mu) with logit(p) = -eta_p taken straight from the
    dropout coefficients.
    """
    mu = mu_hat.mean(data.points)
    logit_p = -p_hat.linear_predictor(data.points)
    zero_q = expit(logit_p - mu)
    idx = data.flat_index
    flat = np.where(data.flat_counts > 0, 1.0, zero_q[idx])
    return Responsibilities.from_flat(data, flat)


# ============================================================================
# M-step: dropout curve
# ============================================================================

def dropout_objective_grad_hess(
    data: BinnedCountData,
    q: Responsibilities,
    basis: BSplineBasis,
    alpha
) -> tuple[float, np.ndarray, np.ndarray]:
    """
    Expected complete-data log-likelihood of the membership indicators.

    F(alpha) = sum_ij [-q_ij eta_i + log sigma(eta_i)], eta = B alpha, which is
    sum_ij [q log p + (1 - q) log(1 - p)] for p = sigma(-eta).

    Returns:
        Tuple of (F, gradient, Hessian); the Hessian is negative semi-definite
    """
    alpha = np.asarray(alpha, dtype=float)
    design = design_matrix(basis, data.points)
    eta = design @ alpha
    m_i = data.replicates.astype(float)
    q_i = q.totals()

    value = float(np.sum(-q_i * eta + m_i * log_expit(eta)))
    grad = design.T @ (m_i * expit(-eta) - q_i)
    curvature = m_i * expit(eta) * expit(-eta)
    hess = -(design.T * curvature) @ design
    return value, grad, hess


def _newton_direction(grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    neg = -hess
    try:
        return linalg.cho_solve(linalg.cho_factor(neg), grad)
    except linalg.LinAlgError:
        pass
    logging.debug("Dropout Newton: Hessian not negative definite, adding ridge")
    try:
        return linalg.cho_solve(linalg.cho_factor(neg + HESSIAN_RIDGE * np.eye(neg.shape[0])), grad)
    except linalg.LinAlgError as e:
        raise IllConditionedError(
            "dropout Hessian is not negative definite after ridge fallback"
        ) from e


def m_step_dropout(
    data: BinnedCountData,
    q: Responsibilities,
    basis: BSplineBasis,
    alpha_init,
    max_iter: int = DROPOUT_MAX_ITER,
    tol: float = DROPOUT_TOL,
    max_halvings: int = MAX_STEP_HALVINGS
) -> DropoutCurve:
    """
    Maximize F(alpha) by damped Newton ascent.

    Stops when the sup-norm of the gradient falls to tol, or when no step
    increases F at working precision.

    Raises:
        ConvergenceError: After max_iter steps, reporting the gradient norm
        IllConditionedError: If the Hessian cannot be factorized
    """
    alpha = np.array(alpha_init, dtype=float)
    if alpha.shape != (basis.m,) or np.any(~np.isfinite(alpha)):
        raise InvalidArgumentError(f"alpha_init must hold {basis.m} finite values")

    value, grad, hess = dropout_objective_grad_hess(data, q, basis, alpha)
    for iteration in range(1, max_iter + 1):
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm <= tol:
            logging.debug(f"Dropout Newton converged in {iteration - 1} steps")
            return DropoutCurve(basis=basis, alpha=alpha)

        step = _newton_direction(grad, hess)
        scale = 1.0
        for _ in range(max_halvings + 1):
            trial_alpha = alpha + scale * step
            trial = dropout_objective_grad_hess(data, q, basis, trial_alpha)
            if math.isfinite(trial[0]) and trial[0] >= value - OBJECTIVE_SLACK * (1.0 + abs(value)):
                break
            scale /= 2.0
        else:
            logging.debug(
                f"Dropout Newton: no ascent at iteration {iteration} (gradient {grad_norm:.3e})"
            )
            return DropoutCurve(basis=basis, alpha=alpha)

        alpha = trial_alpha
        value, grad, hess = trial

    grad_norm = float(np.max(np.abs(grad)))
    if grad_norm <= tol:
        return DropoutCurve(basis=basis, alpha=alpha)
    raise ConvergenceError("dropout Newton", max_iter, grad_norm)


# ============================================================================
# M-step: mean curve
# ============================================================================

def poisson_weights(
    data: BinnedCountData,
    q: Responsibilities
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Collapse responsibilities into per-point Poisson sufficient statistics.

    Returns:
        Tuple of (points, w, ybar) over points with w_i = sum_j q_ij > 0

    Raises:
        DegenerateDataError: If fewer than two points keep positive weight
    """
    w = q.totals()
    weighted = np.array([np.dot(qr, yr) for qr, yr in zip(q.q, data.counts)])
    keep = w > 0
    if np.count_nonzero(keep) < 2:
        raise DegenerateDataError("fewer than two points carry Poisson weight")
    return data.points[keep], w[keep], weighted[keep] / w[keep]


def m_step_mean(
    data: BinnedCountData,
    q: Responsibilities,
    lam: float,
    init: Optional[SplineMeanCurve] = None,
    **newton_options
) -> SplineMeanCurve:
    """
    Fit the mean curve to the responsibility-weighted counts.

    Minimizes -sum_ij (q y log mu - q mu) + (lam / 2) J(eta); points whose
    weight vanished are left out of this fit only.
    """
    points, w, ybar = poisson_weights(data, q)
    return fit_poisson_spline(points, w, ybar, lam, domain=data.domain, init=init, **newton_options)


# ============================================================================
# Objective
# ============================================================================

def _mixture_nll(y, mu, y_log_mu, log_p, log_1mp) -> float:
    log_pois = y_log_mu - mu - gammaln(y + 1.0)
    with np.errstate(divide="ignore"):
        log_zero = np.logaddexp(log_p - mu, log_1mp)
    return float(-np.sum(np.where(y > 0, log_p + log_pois, log_zero)))


def observed_nll(y, mu, p) -> float:
    """
    Observed-data negative log-likelihood of the zero-inflated Poisson mixture.

    sum -log[p Pois(y; mu) + (1 - p) 1{y = 0}], broadcasting y, mu and p.
    """
    y, mu, p = np.broadcast_arrays(
        np.asarray(y, dtype=float), np.asarray(mu, dtype=float), np.asarray(p, dtype=float)
    )
    with np.errstate(divide="ignore"):
        return _mixture_nll(y, mu, xlogy(y, mu), np.log(p), np.log1p(-p))


def _penalized_nll(
    data: BinnedCountData,
    mean_curve: SplineMeanCurve,
    dropout: DropoutCurve,
    lam: float
) -> float:
    idx = data.flat_index
    y = data.flat_counts.astype(float)
    eta_mu = mean_curve.eta(data.points)[idx]
    eta_p = dropout.linear_predictor(data.points)[idx]
    nll = _mixture_nll(y, np.exp(eta_mu), y * eta_mu, log_expit(-eta_p), log_expit(eta_p))
    return nll + 0.5 * lam * mean_curve.roughness()


# ============================================================================
# Driver
# ============================================================================

@dataclass(frozen=True)
class ZissConfig:
    """
    Settings of one ZISS fit.

    Attributes:
        basis_m: Number of B-spline functions for the dropout curve
        degree: B-spline degree
        epsilon: EM stopping tolerance on the relative change of mu at the points
        max_iter: Maximum number of EM iterations
        lambda_policy: How lambda is chosen after the EM loop
    """
    basis_m: int = DEFAULT_BASIS_M
    degree: int = DEFAULT_BASIS_DEGREE
    epsilon: float = DEFAULT_EPSILON
    max_iter: int = DEFAULT_EM_MAX_ITER
    lambda_policy: LambdaPolicy = field(default_factory=LambdaPolicy)
    dropout_max_iter: int = DROPOUT_MAX_ITER
    dropout_tol: float = DROPOUT_TOL
    poisson_max_iter: int = POISSON_MAX_ITER
    poisson_tol: float = POISSON_TOL
    max_step_halvings: int = MAX_STEP_HALVINGS
    max_knots: int = MAX_REPRESENTER_KNOTS

    def __post_init__(self) -> None:
        if self.degree < 0 or self.basis_m < self.degree + 1:
            raise InvalidArgumentError(
                f"basis_m = {self.basis_m} must be at least degree + 1 = {self.degree + 1}"
            )
        if not self.epsilon > 0 or self.max_iter < 1:
            raise InvalidArgumentError("epsilon and max_iter must be positive")

    @classmethod
    def from_config(cls, **overrides) -> "ZissConfig":
        """Settings from the 'ziss' and 'newton' configuration sections; keyword arguments win."""
        values = {
            "basis_m": config.get("ziss.basis_m", DEFAULT_BASIS_M),
            "degree": config.get("ziss.degree", DEFAULT_BASIS_DEGREE),
            "epsilon": config.get("ziss.epsilon", DEFAULT_EPSILON),
            "max_iter": config.get("ziss.max_iter", DEFAULT_EM_MAX_ITER),
            "max_knots": config.get("ziss.max_knots", MAX_REPRESENTER_KNOTS),
            "dropout_max_iter": config.get("newton.dropout_max_iter", DROPOUT_MAX_ITER),
            "dropout_tol": config.get("newton.dropout_tol", DROPOUT_TOL),
            "poisson_max_iter": config.get("newton.poisson_max_iter", POISSON_MAX_ITER),
            "poisson_tol": config.get("newton.poisson_tol", POISSON_TOL),
            "max_step_halvings": config.get("newton.max_step_halvings", MAX_STEP_HALVINGS),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        if "lambda_policy" not in values:
            values["lambda_policy"] = LambdaPolicy.from_config()
        try:
            return cls(**values)
        except InvalidArgumentError as e:
            raise ConfigurationError("ziss", str(e)) from e

    @classmethod
    def from_dict(cls, values: dict) -> "ZissConfig":
        """Inverse of to_dict, used to ship settings to worker processes."""
        values = dict(values)
        values["lambda_policy"] = LambdaPolicy(**values.get("lambda_policy", {}))
        return cls(**values)

    def to_dict(self) -> dict:
        return asdict(self)

    def poisson_options(self) -> dict:
        """Keyword arguments for the penalized Poisson Newton solver."""
        return {
            "max_iter": self.poisson_max_iter,
            "tol": self.poisson_tol,
            "max_halvings": self.max_step_halvings,
            "max_knots": self.max_knots,
        }

    def dropout_options(self) -> dict:
        return {
            "max_iter": self.dropout_max_iter,
            "tol": self.dropout_tol,
            "max_halvings": self.max_step_halvings,
        }


@dataclass(frozen=True)
class ZissFit:
    """
    Result of fit_ziss.

    Attributes:
        dropout: Fitted logistic curve p(t)
        mean_curve: Fitted mean curve mu(t)
        lam: Smoothing parameter of mean_curve
        responsibilities: Responsibilities of the last E-step
        trace: Penalized observed-data NLL at lam, at the start and after each
            iteration of the last EM loop
        iterations: Number of EM iterations run, over both loops under GCV
        converged: Whether the last EM loop met its tolerance
        gcv_grid: Every lambda scored by GCV, when lambda was chosen by GCV
        gcv_scores: GCV score per value of gcv_grid
    """
    dropout: DropoutCurve
    mean_curve: SplineMeanCurve
    lam: float
    responsibilities: Responsibilities
    trace: np.ndarray
    iterations: int
    converged: bool
    gcv_grid: Optional[np.ndarray] = None
    gcv_scores: Optional[np.ndarray] = None

    def mean(self, t) -> np.ndarray:
        return self.mean_curve.mean(t)

    def dropout_prob(self, t) -> np.ndarray:
        return self.dropout.dropout(t)


def penalized_nll(data: BinnedCountData, fit: ZissFit) -> float:
    """Observed-data mixture NLL of the fit plus (lam / 2) J(eta)."""
    return _penalized_nll(data, fit.mean_curve, fit.dropout, fit.lam)


def _initial_curves(data: BinnedCountData, basis: BSplineBasis) -> tuple[SplineMeanCurve, DropoutCurve]:
    y = data.flat_counts
    positive = y[y > 0]
    mu0 = float(positive.mean()) if positive.size else FALLBACK_INITIAL_MEAN
    q0 = np.where(y > 0, 1.0, INITIAL_ZERO_RESPONSIBILITY)
    p0 = float(np.clip(q0.mean(), INITIAL_PROB_CLIP, 1.0 - INITIAL_PROB_CLIP))
    return (
        SplineMeanCurve.constant(data.points, data.domain, mu0),
        DropoutCurve.constant(basis, p0),
    )


def _mean_change(old: np.ndarray, new: np.ndarray) -> float:
    return float(np.linalg.norm(new - old) / (1.0 + np.linalg.norm(old)))


def em_cycle(
    data: BinnedCountData,
    mean_curve: SplineMeanCurve,
    dropout: DropoutCurve,
    lam: float,
    settings: Optional[ZissConfig] = None
) -> tuple[Responsibilities, SplineMeanCurve, DropoutCurve]:
    """
    One EM iteration at a fixed lambda.

    Returns:
        Tuple of (responsibilities of the E-step, new mean curve, new dropout curve)
    """
    if settings is None:
        settings = ZissConfig.from_config()
    q = e_step(data, mean_curve, dropout)
    mean_curve = m_step_mean(data, q, lam, init=mean_curve, **settings.poisson_options())
    dropout = m_step_dropout(data, q, dropout.basis, dropout.alpha, **settings.dropout_options())
    return q, mean_curve, dropout


@dataclass
class _EmRun:
    mean_curve: SplineMeanCurve
    dropout: DropoutCurve
    q: Optional[Responsibilities]
    trace: list[float]
    iterations: int = 0
    converged: bool = False


def _run_em(
    data: BinnedCountData,
    mean_curve: SplineMeanCurve,
    dropout: DropoutCurve,
    lam: float,
    settings: ZissConfig
) -> _EmRun:
    run = _EmRun(mean_curve, dropout, None, [_penalized_nll(data, mean_curve, dropout, lam)])
    mu_at_points = mean_curve.mean(data.points)
    for iteration in range(1, settings.max_iter + 1):
        run.q, run.mean_curve, run.dropout = em_cycle(data, run.mean_curve, run.dropout, lam, settings)
        run.trace.append(_penalized_nll(data, run.mean_curve, run.dropout, lam))
        run.iterations = iteration

        new_mu = run.mean_curve.mean(data.points)
        change = _mean_change(mu_at_points, new_mu)
        mu_at_points = new_mu
        logging.debug(
            f"EM iteration {iteration} (lambda={lam:.4g}): "
            f"penalized NLL={run.trace[-1]:.8g}, relative change={change:.3e}"
        )
        if change <= settings.epsilon:
            run.converged = True
            break

    if run.converged:
        logging.info(f"EM converged after {run.iterations} iterations at lambda={lam:.4g}")
    else:
        logging.warning(f"EM did not converge within {settings.max_iter} iterations at lambda={lam:.4g}")
    return run


def fit_ziss(data: BinnedCountData, settings: Optional[ZissConfig] = None) -> ZissFit:
    """
    Fit the zero-inflated smoothing spline by EM.

    EM first runs at lambda_init. Under the GCV policy, lambda is then chosen
    on the working data of that fit and EM is run again from there at the
    selected lambda, so the returned curves are an EM fixed point at the
    reported lambda.

    Args:
        data: Binned counts
        settings: Fit settings; defaults come from the configuration file

    Returns:
        Fitted curves; converged is False when the last EM loop hit max_iter

    Raises:
        DegenerateDataError: If no count is positive
    """
    if settings is None:
        settings = ZissConfig.from_config()
    if not np.any(data.flat_counts > 0):
        raise DegenerateDataError("all counts are zero; nothing to fit")

    policy = settings.lambda_policy
    basis = make_clamped_uniform_basis(data.domain[0], data.domain[1], settings.basis_m, settings.degree)
    lam = policy.initial(data.n_obs)
    logging.info(
        f"ZISS: {data.n_points} points, {data.n_obs} observations, "
        f"lambda_init={lam:.4g}, m={basis.m}"
    )

    mean_curve, dropout = _initial_curves(data, basis)
    run = _run_em(data, mean_curve, dropout, lam, settings)
    iterations = run.iterations

    selection = None
    if policy.mode == "gcv":
        points, w, ybar = poisson_weights(data, run.q)
        selection = select_lambda(
            points, w, ybar, data.n_obs, policy, domain=data.domain, **settings.poisson_options()
        )
        logging.info(f"GCV selected lambda={selection.lam:.4g}")
        if selection.lam != lam:
            lam = selection.lam
            run = _run_em(data, run.mean_curve, run.dropout, lam, settings)
            iterations += run.iterations

    return ZissFit(
        dropout=run.dropout,
        mean_curve=run.mean_curve,
        lam=lam,
        responsibilities=run.q,
        trace=np.asarray(run.trace),
        iterations=iterations,
        converged=run.converged,
        gcv_grid=None if selection is None else selection.grid,
        gcv_scores=None if selection is None else selection.scores,
    )
