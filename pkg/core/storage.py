"""
Storage Module

File formats of the command line:

- observation CSV: long format, header t,y, one row per cell observation
- fit JSON: coefficients of both fitted curves plus run diagnostics
- curve CSV: t,mu_hat,dropout_hat[,mu_true] on a uniform grid
- result tables: replicate and sweep MSE summaries

Every write holds a FileLock on <path>.lock. OS errors surface as StorageError,
malformed content as DataValidationError.
"""

import json
import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np
import pandas as pd
from filelock import FileLock, Timeout

from .bspline import BSplineBasis
from .constants import DEFAULT_GRID_POINTS, FILE_LOCK_TIMEOUT
from .exceptions import (
    DataValidationError,
    DegenerateDataError,
    DomainError,
    StorageError,
)
from .rkhs_spline import Domain, SplineMeanCurve
from .simulate import GroundTruth, MethodSummary
from .types import FitSummary
from .ziss_em import BinnedCountData, DropoutCurve, ZissFit, penalized_nll

# Header is line 1 and blank lines keep their place, so the row labelled k sits on line k + 2
_FIRST_DATA_LINE = 2


@contextmanager
def _locked(path: Path) -> Iterator[None]:
    lock = FileLock(f"{path}.lock", timeout=FILE_LOCK_TIMEOUT)
    try:
        with lock:
            yield
    except Timeout as e:
        raise StorageError(str(path), f"could not acquire lock {lock.lock_file}") from e


def write_frame(path, frame: pd.DataFrame) -> None:
    """Write a table as CSV without the index."""
    path = Path(path)
    with _locked(path):
        try:
            frame.to_csv(path, index=False)
        except OSError as e:
            raise StorageError(str(path), f"write failed: {e}") from e
    logging.info(f"Wrote {len(frame)} rows to {path}")


def write_json(path, document: dict) -> None:
    path = Path(path)
    with _locked(path):
        try:
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(document, f, indent=2)
                f.write("\n")
        except OSError as e:
            raise StorageError(str(path), f"write failed: {e}") from e
    logging.info(f"Wrote {path}")


def read_json(path) -> dict:
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except OSError as e:
        raise StorageError(str(path), f"read failed: {e}") from e
    except json.JSONDecodeError as e:
        raise DataValidationError(f"{path}: malformed JSON: {e}") from e


def _read_csv(path, columns: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            skip_blank_lines=False,
        )
    except OSError as e:
        raise StorageError(str(path), f"read failed: {e}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataValidationError(f"{path}: malformed CSV: {e}") from e

    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataValidationError(f"{path}: missing column(s) {', '.join(missing)}", lines=[1])
    frame = frame[~(frame.isna() | (frame == "")).all(axis=1)]
    if frame.empty:
        raise DataValidationError(f"{path}: no data rows")
    return frame


def _parse_reals(frame: pd.DataFrame, column: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse a text column as reals; returns (values, bad row mask)."""
    values = np.array([_exact_float(s) for s in frame[column]], dtype=float)
    return values, ~np.isfinite(values)


def _source_lines(frame: pd.DataFrame, rows: np.ndarray) -> list[int]:
    """File line numbers of the given frame rows."""
    return (frame.index.to_numpy()[rows] + _FIRST_DATA_LINE).tolist()


def _exact_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return math.nan


def read_observations(path) -> pd.DataFrame:
    """
    Read a long-format observation CSV.

    Returns:
        Frame with float column t and integer column y

    Raises:
        StorageError: If the file cannot be read
        DataValidationError: On malformed rows, listing their line numbers
    """
    frame = _read_csv(path, ("t", "y"))
    t, bad_t = _parse_reals(frame, "t")
    y, bad_y = _parse_reals(frame, "y")
    with np.errstate(invalid="ignore"):
        bad_y |= (y < 0) | (y != np.round(y))

    bad = np.flatnonzero(bad_t | bad_y)
    if bad.size:
        raise DataValidationError(
            f"{path}: t must be a real number and y a non-negative integer",
            lines=_source_lines(frame, bad),
        )
    logging.debug(f"Read {len(frame)} observations from {path}")
    return pd.DataFrame({"t": t, "y": y.astype(np.int64)})


def read_truth_table(path) -> pd.DataFrame:
    """Read a truth CSV with columns t,mu_true."""
    frame = _read_csv(path, ("t", "mu_true"))
    t, bad_t = _parse_reals(frame, "t")
    mu, bad_mu = _parse_reals(frame, "mu_true")
    bad = np.flatnonzero(bad_t | bad_mu)
    if bad.size:
        raise DataValidationError(
            f"{path}: t and mu_true must be real numbers",
            lines=_source_lines(frame, bad),
        )
    return pd.DataFrame({"t": t, "mu_true": mu})


def observations_frame(data: BinnedCountData) -> pd.DataFrame:
    """Long-format t,y frame of a binned dataset."""
    return pd.DataFrame({"t": data.points[data.flat_index], "y": data.flat_counts})


# ============================================================================
# Binning
# ============================================================================

def parse_domain(text: Optional[str]) -> Optional[Domain]:
    """Parse 'LO,HI' into a domain tuple."""
    if text is None:
        return None
    try:
        lo, hi = (float(part) for part in text.split(","))
    except ValueError as e:
        raise DataValidationError(f"domain must be given as LO,HI, got {text!r}") from e
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise DataValidationError(f"domain must satisfy LO < HI, got {text!r}")
    return lo, hi


def bin_observations(
    frame: pd.DataFrame,
    bins: int,
    domain: Optional[Domain] = None
) -> BinnedCountData:
    """
    Group observations into pseudotime points.

    With bins > 0 the domain (default [min t, max t]) is cut into equal-width
    bins, each non-empty bin contributing its midpoint. With bins = 0 every
    distinct t is a point and the default domain reaches half the smallest
    spacing beyond the extreme points.

    Raises:
        DegenerateDataError: If the observed pseudotimes cannot span a domain
        DomainError: If an observation lies outside an explicit domain
    """
    t = frame["t"].to_numpy(dtype=float)
    y = frame["y"].to_numpy()
    if bins < 0:
        raise DataValidationError(f"bins must be non-negative, got {bins}")

    if domain is not None:
        outside = (t < domain[0]) | (t > domain[1])
        if np.any(outside):
            bad = float(t[outside][0])
            raise DomainError(f"pseudotime {bad} outside domain [{domain[0]}, {domain[1]}]", value=bad)

    if bins == 0:
        distinct = np.unique(t)
        if distinct.size < 2:
            raise DegenerateDataError("at least two distinct pseudotime values are required")
        if domain is None:
            half_gap = float(np.min(np.diff(distinct))) / 2.0
            domain = (float(distinct[0]) - half_gap, float(distinct[-1]) + half_gap)
        return BinnedCountData.from_observations(t, y, domain)

    lo, hi = domain if domain is not None else (float(t.min()), float(t.max()))
    if not lo < hi:
        raise DegenerateDataError("pseudotime range is empty; nothing to bin")
    width = (hi - lo) / bins
    index = np.clip(np.floor((t - lo) / width).astype(np.int64), 0, bins - 1)
    midpoints = lo + (index + 0.5) * width
    data = BinnedCountData.from_observations(midpoints, y, (lo, hi))
    logging.info(f"Binned {t.size} observations into {data.n_points} of {bins} bins")
    return data


# ============================================================================
# Fit Documents
# ============================================================================

def fit_summary(fit: ZissFit, data: BinnedCountData) -> FitSummary:
    """JSON document describing a fit."""
    curve = fit.mean_curve
    return {
        "lambda": float(fit.lam),
        "iterations": int(fit.iterations),
        "converged": bool(fit.converged),
        "penalized_nll": penalized_nll(data, fit),
        "alpha": fit.dropout.alpha.tolist(),
        "spline": {
            "knots": curve.knots.tolist(),
            "d": curve.d.tolist(),
            "c": curve.c.tolist(),
            "domain": list(curve.domain),
        },
        "basis": {
            "degree": int(fit.dropout.basis.degree),
            "knots": fit.dropout.basis.knots.tolist(),
        },
        "points": data.points.tolist(),
        "trace": fit.trace.tolist(),
    }


def curves_from_summary(summary: dict, path="fit") -> tuple[SplineMeanCurve, DropoutCurve]:
    """Rebuild both fitted curves from a fit document."""
    try:
        spline = summary["spline"]
        basis = summary["basis"]
        mean_curve = SplineMeanCurve(
            knots=spline["knots"], d=spline["d"], c=spline["c"], domain=tuple(spline["domain"])
        )
        dropout = DropoutCurve(
            basis=BSplineBasis(degree=int(basis["degree"]), knots=basis["knots"]),
            alpha=summary["alpha"],
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataValidationError(f"{path}: incomplete fit document ({e})") from e
    return mean_curve, dropout


def read_fit(path) -> tuple[SplineMeanCurve, DropoutCurve, FitSummary]:
    summary = read_json(path)
    if not isinstance(summary, dict):
        raise DataValidationError(f"{path}: fit document must be a JSON object")
    mean_curve, dropout = curves_from_summary(summary, path)
    return mean_curve, dropout, summary


@dataclass(frozen=True)
class CurveExport:
    """Fitted curves on a uniform evaluation grid."""
    grid: np.ndarray
    mu_hat: np.ndarray
    dropout_hat: np.ndarray
    mu_true: Optional[np.ndarray] = None

    @classmethod
    def from_curves(
        cls,
        mean_curve: SplineMeanCurve,
        dropout: DropoutCurve,
        grid_points: int = DEFAULT_GRID_POINTS,
        truth: Optional[GroundTruth] = None
    ) -> "CurveExport":
        lo, hi = mean_curve.domain
        grid = np.linspace(lo, hi, grid_points)
        mu_true = None if truth is None else np.asarray(truth.mu_true(grid), dtype=float)
        return cls(
            grid=grid,
            mu_hat=mean_curve.mean(grid),
            dropout_hat=dropout.dropout(grid),
            mu_true=mu_true,
        )

    def to_frame(self) -> pd.DataFrame:
        columns = {"t": self.grid, "mu_hat": self.mu_hat, "dropout_hat": self.dropout_hat}
        if self.mu_true is not None:
            columns["mu_true"] = self.mu_true
        return pd.DataFrame(columns)


# ============================================================================
# Result Tables
# ============================================================================

def summary_frame(summaries: dict[str, MethodSummary]) -> pd.DataFrame:
    return pd.DataFrame([s.to_row() for s in summaries.values()])


def sweep_frame(parameter: str, results: list[tuple[float, dict[str, MethodSummary]]]) -> pd.DataFrame:
    rows = [
        {"parameter": parameter, "value": value, **summary.to_row()}
        for value, summaries in results
        for summary in summaries.values()
    ]
    return pd.DataFrame(rows)
