"""
Baseline Fitters

Plain Poisson smoothing splines used as comparison methods:

- DSS fits every observation, zeros included
- NZSS fits the strictly positive observations only

Both share the solver and the lambda policy of the ZISS mean curve.
"""

import logging
from typing import Optional

import numpy as np

from .exceptions import DegenerateDataError
from .rkhs_spline import LambdaPolicy, SplineMeanCurve, fit_with_policy
from .ziss_em import BinnedCountData


def _fit_all_counts(
    data: BinnedCountData,
    lambda_policy: Optional[LambdaPolicy],
    label: str,
    newton_options: dict
) -> SplineMeanCurve:
    if lambda_policy is None:
        lambda_policy = LambdaPolicy.from_config()
    if data.n_points < 2:
        raise DegenerateDataError(f"{label}: at least two distinct points are required")
    if not np.any(data.flat_counts > 0):
        raise DegenerateDataError(f"{label}: all counts are zero")

    m_i = data.replicates.astype(float)
    curve, lam = fit_with_policy(
        data.points, m_i, data.totals() / m_i, data.n_obs, lambda_policy,
        domain=data.domain, **newton_options
    )
    logging.debug(f"{label}: lambda={lam:.4g} on {data.n_obs} observations")
    return curve


def fit_dss(
    data: BinnedCountData,
    lambda_policy: Optional[LambdaPolicy] = None,
    **newton_options
) -> SplineMeanCurve:
    """
    Poisson smoothing spline on all counts, zeros included.

    Weights are the replicate counts M_i and responses the per-point means.

    Raises:
        DegenerateDataError: If all counts are zero
    """
    return _fit_all_counts(data, lambda_policy, "DSS", newton_options)


def fit_nzss(
    data: BinnedCountData,
    lambda_policy: Optional[LambdaPolicy] = None,
    **newton_options
) -> SplineMeanCurve:
    """
    Poisson smoothing spline on the strictly positive counts.

    Raises:
        DegenerateDataError: If fewer than two distinct points carry a positive count
    """
    return _fit_all_counts(data.positive_only(), lambda_policy, "NZSS", newton_options)
