"""
Type Definitions Module

Centralized type definitions for dictionaries that cross a process or file
boundary: fit JSON documents, worker requests/responses and result rows.
"""

from typing import TypedDict, Optional, Literal


# ============================================================================
# Method Types
# ============================================================================

MethodName = Literal["ziss", "nzss", "dss"]

ALL_METHODS: tuple[MethodName, ...] = ("ziss", "nzss", "dss")

SweepParameter = Literal["overdispersion", "shift"]

SWEEP_PARAMETERS: tuple[SweepParameter, ...] = ("overdispersion", "shift")


# ============================================================================
# Fit Summary (JSON) Types
# ============================================================================

class SplineSection(TypedDict):
    """Representer coefficients of the fitted log-mean curve."""
    knots: list[float]
    d: list[float]
    c: list[float]
    domain: list[float]


class BasisSection(TypedDict):
    """B-spline basis of the dropout curve."""
    degree: int
    knots: list[float]


# Document written by `fit` and read back by `evaluate`; "lambda" is a
# keyword, hence the functional syntax.
FitSummary = TypedDict(
    "FitSummary",
    {
        "lambda": float,
        "iterations": int,
        "converged": bool,
        "penalized_nll": float,
        "alpha": list[float],
        "spline": SplineSection,
        "basis": BasisSection,
        "points": list[float],
        "trace": list[float],
    },
)


# ============================================================================
# Replicate Worker Types
# ============================================================================

class ReplicateRequest(TypedDict):
    """Request sent to replicate workers."""
    id: int
    type: Literal["replicate", "shutdown"]
    replicate: int
    seed: int
    config: dict
    ziss: dict
    methods: list[str]


class ReplicateResponse(TypedDict, total=False):
    """Response from replicate workers."""
    request_id: int
    replicate: int
    mse: dict[str, Optional[float]]
    errors: dict[str, str]
    duration: float
    error: Optional[str]


# ============================================================================
# Result Table Types
# ============================================================================

class SummaryRow(TypedDict):
    """One row of a replicate MSE table."""
    method: str
    mean_mse: float
    std_mse: float
    effective_R: int
    failures: int
