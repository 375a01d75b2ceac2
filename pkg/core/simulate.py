"""
Simulation Module

Synthetic zero-inflated count data with known truth, and the replicate
harness that scores ZISS against the DSS and NZSS baselines by the MSE of
the fitted mean at the design points.

Two ground truths are built in. By default the second curve is the dropout
(excess-zero) probability:

- setting 1: mu(t) = 2 sin(9t) + 2.5, dropout(t) = 1 / (1 + exp(-(t - 1/2)^2 / 2 + 1))
- setting 2: mu(t) = two Gaussian bumps at 0.2 and 0.7, dropout(t) = sin(6t) / 4 + 1/2

Counts are Poisson(mu + h), or negative binomial with mean mu + h and
variance (mu + h)(1 + a (mu + h)) when the over-dispersion a is positive.

With truth_convention "poisson" the second curve of a built-in truth is read
as the probability of the Poisson component instead, so the dropout used to
draw the data is one minus the listed curve.
"""

import functools
import logging
import math
from dataclasses import dataclass, asdict, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.special import expit

from .baselines import fit_dss, fit_nzss
from .config import config
from .constants import (
    DEFAULT_N_POINTS,
    DEFAULT_N_PER_POINT,
    DEFAULT_REPLICATES,
    DESIGN_EDGE,
    DEFAULT_TRUTH_CONVENTION,
    TRUTH_CONVENTIONS,
)
from .exceptions import ConfigurationError, InvalidArgumentError, ZissError
from .rkhs_spline import SplineMeanCurve
from .types import (
    ALL_METHODS,
    SWEEP_PARAMETERS,
    ReplicateRequest,
    ReplicateResponse,
    SummaryRow,
    SweepParameter,
)
from .ziss_em import BinnedCountData, ZissConfig, fit_ziss

SIMULATION_DOMAIN = (0.0, 1.0)
_ROOT_2PI = math.sqrt(2.0 * math.pi)


# ============================================================================
# Ground Truth
# ============================================================================

def mu_setting1(t):
    return 2.0 * np.sin(9.0 * np.asarray(t, dtype=float)) + 2.5


def dropout_setting1(t):
    t = np.asarray(t, dtype=float)
    return expit(0.5 * (t - 0.5) ** 2 - 1.0)


def mu_setting2(t):
    t = np.asarray(t, dtype=float)
    return (
        8.0 / _ROOT_2PI * np.exp(-10.0 * (t - 0.2) ** 2)
        + 6.0 / _ROOT_2PI * np.exp(-100.0 * (t - 0.7) ** 2)
    )


def dropout_setting2(t):
    return 0.25 * np.sin(6.0 * np.asarray(t, dtype=float)) + 0.5


def _shifted(mu: Callable, shift: float, t):
    return mu(t) + shift


def _complement(p: Callable, t):
    return 1.0 - np.asarray(p(t), dtype=float)


@dataclass(frozen=True)
class GroundTruth:
    """
    True mean and dropout curves over [0, 1].

    Attributes:
        mu_true: Mean of the count component
        p_zero_true: Probability of an excess zero
        name: Label used in logs and output files
    """
    mu_true: Callable
    p_zero_true: Callable
    name: str = "custom"

    def shifted(self, shift: float) -> "GroundTruth":
        """Truth whose mean is moved up by shift."""
        if shift == 0:
            return self
        return replace(
            self,
            mu_true=functools.partial(_shifted, self.mu_true, shift),
            name=f"{self.name}+{shift:g}",
        )

    def as_poisson_probability(self) -> "GroundTruth":
        """Truth reading the current second curve as the Poisson-component probability."""
        return replace(
            self,
            p_zero_true=functools.partial(_complement, self.p_zero_true),
            name=f"{self.name}:poisson",
        )


def truth_setting1() -> GroundTruth:
    """Low zero inflation around an oscillating mean."""
    return GroundTruth(mu_true=mu_setting1, p_zero_true=dropout_setting1, name="setting1")


def truth_setting2() -> GroundTruth:
    """High zero inflation around a two-bump mean."""
    return GroundTruth(mu_true=mu_setting2, p_zero_true=dropout_setting2, name="setting2")


BUILTIN_TRUTHS: dict[str, Callable[[], GroundTruth]] = {
    "setting1": truth_setting1,
    "setting2": truth_setting2,
}


def truth_for_setting(setting: int) -> GroundTruth:
    return BUILTIN_TRUTHS[f"setting{setting}"]()


# ============================================================================
# Data Generation
# ============================================================================

@dataclass(frozen=True)
class SimulationConfig:
    """
    Settings of one simulation study.

    Attributes:
        setting: Built-in ground truth (1 or 2)
        n_points: Number of equally spaced design points N
        n_per_point: Samples per design point M
        overdispersion: Negative-binomial over-dispersion a (0 means Poisson)
        shift: Up-moving constant h added to the true mean
        seed: Base seed; replicate r uses seed + r
        replicates: Number of replicates R
        truth_convention: Reading of the second built-in truth curve, "dropout"
            or "poisson" (Poisson-component probability)
    """
    setting: int = 1
    n_points: int = DEFAULT_N_POINTS
    n_per_point: int = DEFAULT_N_PER_POINT
    overdispersion: float = 0.0
    shift: float = 0.0
    seed: int = 0
    replicates: int = DEFAULT_REPLICATES
    truth_convention: str = DEFAULT_TRUTH_CONVENTION

    def __post_init__(self) -> None:
        if self.setting not in (1, 2):
            raise InvalidArgumentError(f"setting must be 1 or 2, got {self.setting}")
        if self.n_points < 2:
            raise InvalidArgumentError(f"need at least 2 design points, got {self.n_points}")
        if self.n_per_point < 1:
            raise InvalidArgumentError(f"need at least 1 sample per point, got {self.n_per_point}")
        if not (self.overdispersion >= 0 and math.isfinite(self.overdispersion)):
            raise InvalidArgumentError(f"over-dispersion must be non-negative, got {self.overdispersion}")
        if not (self.shift >= 0 and math.isfinite(self.shift)):
            raise InvalidArgumentError(f"shift must be non-negative, got {self.shift}")
        if self.seed < 0:
            raise InvalidArgumentError(f"seed must be non-negative, got {self.seed}")
        if self.replicates < 1:
            raise InvalidArgumentError(f"replicates must be positive, got {self.replicates}")
        if self.truth_convention not in TRUTH_CONVENTIONS:
            raise InvalidArgumentError(
                f"truth convention must be one of {', '.join(TRUTH_CONVENTIONS)}, "
                f"got {self.truth_convention!r}"
            )

    @classmethod
    def from_config(cls, **overrides) -> "SimulationConfig":
        """Settings from the 'simulation' configuration section; keyword arguments win."""
        values = {
            "n_points": config.get("simulation.n_points", DEFAULT_N_POINTS),
            "n_per_point": config.get("simulation.n_per_point", DEFAULT_N_PER_POINT),
            "replicates": config.get("simulation.replicates", DEFAULT_REPLICATES),
            "seed": config.get("simulation.seed", 0),
            "truth_convention": config.get("simulation.truth_convention", DEFAULT_TRUTH_CONVENTION),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**values)
        except InvalidArgumentError as e:
            raise ConfigurationError("simulation", str(e)) from e

    def to_dict(self) -> dict:
        return asdict(self)


def design_points(n_points: int) -> np.ndarray:
    """Equally spaced points on [0, 1] mapped onto [1e-6, 1 - 1e-6]."""
    return DESIGN_EDGE + (1.0 - 2.0 * DESIGN_EDGE) * np.linspace(0.0, 1.0, n_points)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; every seed is an independent stream."""
    return np.random.Generator(np.random.Philox(seed))


def generate(
    config: SimulationConfig,
    truth: Optional[GroundTruth] = None
) -> tuple[BinnedCountData, GroundTruth]:
    """
    Draw one dataset.

    Args:
        config: Simulation settings; config.seed selects the stream
        truth: Ground truth overriding the built-in setting; used as given,
            whatever config.truth_convention says

    Returns:
        Tuple of (data, truth with the shift applied to its mean)
    """
    if truth is None:
        truth = truth_for_setting(config.setting)
        if config.truth_convention == "poisson":
            truth = truth.as_poisson_probability()

    t = design_points(config.n_points)
    mean = np.asarray(truth.mu_true(t), dtype=float) + config.shift
    if np.any(~np.isfinite(mean)) or np.any(mean <= 0):
        raise InvalidArgumentError("true mean plus shift must be positive at every design point")
    p_zero = np.clip(np.asarray(truth.p_zero_true(t), dtype=float), 0.0, 1.0)

    rng = make_rng(config.seed)
    shape = (config.n_points, config.n_per_point)
    excess_zero = rng.random(shape) < p_zero[:, None]
    if config.overdispersion == 0:
        y = rng.poisson(np.broadcast_to(mean[:, None], shape))
    else:
        size = 1.0 / config.overdispersion
        y = rng.negative_binomial(size, np.broadcast_to((size / (size + mean))[:, None], shape))
    y[excess_zero] = 0

    data = BinnedCountData(points=t, counts=tuple(y), domain=SIMULATION_DOMAIN)
    return data, truth.shifted(config.shift)


def mse(curve, truth: GroundTruth, points) -> float:
    """Mean over points of (mu_hat(t) - mu_true(t))^2."""
    points = np.asarray(points, dtype=float)
    gap = curve.mean(points) - np.asarray(truth.mu_true(points), dtype=float)
    return float(np.mean(gap ** 2))


# ============================================================================
# Replicate Harness
# ============================================================================

def fit_method(method: str, data: BinnedCountData, settings: ZissConfig) -> SplineMeanCurve:
    """Fit the mean curve with one of 'ziss', 'nzss' or 'dss'."""
    if method == "ziss":
        return fit_ziss(data, settings).mean_curve
    if method == "nzss":
        return fit_nzss(data, settings.lambda_policy, **settings.poisson_options())
    if method == "dss":
        return fit_dss(data, settings.lambda_policy, **settings.poisson_options())
    raise InvalidArgumentError(f"unknown method {method!r}; choose from {', '.join(ALL_METHODS)}")


def _check_methods(methods: Iterable[str]) -> list[str]:
    methods = list(dict.fromkeys(methods))
    unknown = [m for m in methods if m not in ALL_METHODS]
    if unknown or not methods:
        raise InvalidArgumentError(
            f"methods must be a non-empty subset of {', '.join(ALL_METHODS)}, got {methods}"
        )
    return methods


def evaluate_replicate(
    config: SimulationConfig,
    seed: int,
    methods: Sequence[str],
    settings: Optional[ZissConfig] = None
) -> tuple[dict[str, Optional[float]], dict[str, str]]:
    """
    Generate one dataset with the given seed and score every method on it.

    Returns:
        Tuple of (MSE per method, error message per failed method)
    """
    if settings is None:
        settings = ZissConfig.from_config()
    data, truth = generate(replace(config, seed=seed))
    scores: dict[str, Optional[float]] = {}
    errors: dict[str, str] = {}
    for method in methods:
        try:
            curve = fit_method(method, data, settings)
            scores[method] = mse(curve, truth, data.points)
        except ZissError as e:
            logging.warning(f"{method.upper()} failed on seed {seed}: {e}")
            scores[method] = None
            errors[method] = str(e)
    return scores, errors


def handle_replicate_request(request: ReplicateRequest) -> ReplicateResponse:
    """Serve one replicate request; runs in worker processes and inline."""
    settings = ZissConfig.from_dict(request["ziss"])
    scores, errors = evaluate_replicate(
        SimulationConfig(**request["config"]),
        request["seed"],
        request["methods"],
        settings,
    )
    return {
        "request_id": request["id"],
        "replicate": request["replicate"],
        "mse": scores,
        "errors": errors,
    }


@dataclass(frozen=True)
class MethodSummary:
    """
    MSE statistics of one method over the replicates.

    Attributes:
        method: Method name
        mean_mse: Mean MSE over successful replicates
        std_mse: Sample standard deviation (ddof = 1) of the MSEs
        effective_R: Number of successful replicates
        failures: Number of failed replicates
        mses: MSE of every successful replicate in replicate order
    """
    method: str
    mean_mse: float
    std_mse: float
    effective_R: int
    failures: int
    mses: np.ndarray

    @classmethod
    def from_scores(cls, method: str, scores: Sequence[Optional[float]]) -> "MethodSummary":
        values = np.array([s for s in scores if s is not None], dtype=float)
        failures = len(scores) - values.size
        mean = float(values.mean()) if values.size else math.nan
        std = float(values.std(ddof=1)) if values.size >= 2 else math.nan
        return cls(method, mean, std, int(values.size), failures, values)

    def to_row(self) -> SummaryRow:
        return {
            "method": self.method,
            "mean_mse": self.mean_mse,
            "std_mse": self.std_mse,
            "effective_R": self.effective_R,
            "failures": self.failures,
        }


def build_requests(
    config: SimulationConfig,
    methods: Sequence[str],
    settings: ZissConfig,
    vary_seed: bool = True
) -> list[ReplicateRequest]:
    return [
        {
            "id": r,
            "type": "replicate",
            "replicate": r,
            "seed": config.seed + r if vary_seed else config.seed,
            "config": config.to_dict(),
            "ziss": settings.to_dict(),
            "methods": list(methods),
        }
        for r in range(config.replicates)
    ]


def run_replicates(
    config: SimulationConfig,
    methods: Iterable[str] = ALL_METHODS,
    jobs: int = 1,
    vary_seed: bool = True,
    settings: Optional[ZissConfig] = None
) -> dict[str, MethodSummary]:
    """
    Score each method over config.replicates independent datasets.

    Replicate r uses seed config.seed + r (or config.seed for every replicate
    when vary_seed is False). Failed fits are excluded and counted.

    Args:
        config: Simulation settings
        methods: Subset of 'ziss', 'nzss', 'dss'
        jobs: Worker processes; 1 runs in this process
        vary_seed: Whether replicates use distinct seeds
        settings: ZISS fit settings shared by all methods

    Returns:
        Summary per method, in the order given
    """
    from .replicate_pool import ReplicatePool

    methods = _check_methods(methods)
    if config.replicates < 2:
        raise InvalidArgumentError(f"at least 2 replicates are required, got {config.replicates}")
    if settings is None:
        settings = ZissConfig.from_config()

    requests = build_requests(config, methods, settings, vary_seed)
    logging.info(
        f"Running {config.replicates} replicates of setting {config.setting} "
        f"(a={config.overdispersion:g}, h={config.shift:g}) with {jobs} job(s)"
    )
    responses = ReplicatePool(jobs).run(requests)

    summaries = {}
    for method in methods:
        summary = MethodSummary.from_scores(method, [resp["mse"].get(method) for resp in responses])
        if summary.failures:
            logging.warning(
                f"{method.upper()}: {summary.failures} of {config.replicates} replicates failed"
            )
        logging.info(
            f"{method.upper()}: mean MSE={summary.mean_mse:.4f} "
            f"std={summary.std_mse:.4f} (R={summary.effective_R})"
        )
        summaries[method] = summary
    return summaries


def run_sweep(
    config: SimulationConfig,
    parameter: SweepParameter,
    values: Iterable[float],
    methods: Iterable[str] = ALL_METHODS,
    jobs: int = 1,
    settings: Optional[ZissConfig] = None
) -> list[tuple[float, dict[str, MethodSummary]]]:
    """
    Repeat run_replicates while varying 'overdispersion' or 'shift'.

    Returns:
        One (value, summaries) pair per value, in the order given
    """
    if parameter not in SWEEP_PARAMETERS:
        raise InvalidArgumentError(
            f"sweep parameter must be one of {', '.join(SWEEP_PARAMETERS)}, got {parameter!r}"
        )
    results = []
    for value in values:
        swept = replace(config, **{parameter: float(value)})
        results.append((float(value), run_replicates(swept, methods, jobs=jobs, settings=settings)))
    return results
