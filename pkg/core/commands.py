"""
Command Module

Implementations of the command-line subcommands. Each takes the parsed
argparse namespace, writes its output files and returns an exit code; errors
are raised as ZissError subclasses and mapped to exit codes by main.
"""

import argparse
import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .config import config
from .constants import (
    DEFAULT_BINS,
    DEFAULT_GRID_POINTS,
    DEFAULT_OVERDISPERSION_GRID,
    DEFAULT_SHIFT_GRID,
    EXIT_OK,
)
from .exceptions import DataValidationError, NonConvergedFitError
from .replicate_pool import available_cpus
from .rkhs_spline import LambdaPolicy
from .simulate import (
    BUILTIN_TRUTHS,
    GroundTruth,
    SimulationConfig,
    generate,
    run_replicates,
    run_sweep,
)
from .storage import (
    CurveExport,
    bin_observations,
    fit_summary,
    observations_frame,
    parse_domain,
    read_fit,
    read_observations,
    read_truth_table,
    summary_frame,
    sweep_frame,
    write_frame,
    write_json,
)
from .types import ALL_METHODS
from .ziss_em import ZissConfig, fit_ziss


def parse_methods(text: Optional[str]) -> list[str]:
    if not text:
        return list(ALL_METHODS)
    methods = [m.strip().lower() for m in text.split(",") if m.strip()]
    unknown = [m for m in methods if m not in ALL_METHODS]
    if unknown or not methods:
        raise DataValidationError(
            f"--methods takes a comma-separated subset of {','.join(ALL_METHODS)}, got {text!r}"
        )
    return methods


def parse_values(text: Optional[str], default) -> list[float]:
    if not text:
        return list(default)
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise DataValidationError(f"--values takes comma-separated numbers, got {text!r}") from e


def resolve_jobs(jobs: Optional[int]) -> int:
    """Worker count: flag, then configuration, then available processors."""
    if jobs is None:
        jobs = config.get("simulation.jobs")
    if jobs is None:
        jobs = available_cpus()
    return max(1, int(jobs))


def ziss_settings(args: argparse.Namespace) -> ZissConfig:
    """Fit settings from configuration, overridden by any fit flags present."""
    fixed = getattr(args, "lam", None)
    policy = LambdaPolicy.from_config(
        mode="fixed" if fixed is not None else None,
        value=fixed,
        grid_span=getattr(args, "lambda_grid_span", None),
    )
    return ZissConfig.from_config(
        basis_m=getattr(args, "basis_m", None),
        epsilon=getattr(args, "epsilon", None),
        max_iter=getattr(args, "max_iter", None),
        lambda_policy=policy,
    )


def _simulation_config(args: argparse.Namespace, **extra) -> SimulationConfig:
    return SimulationConfig.from_config(
        setting=args.setting,
        n_points=args.n_points,
        n_per_point=args.n_per_point,
        overdispersion=getattr(args, "overdispersion", None),
        shift=getattr(args, "shift", None),
        seed=args.seed,
        truth_convention=getattr(args, "truth_convention", None),
        **extra,
    )


def _builtin_truth(name: str) -> GroundTruth:
    return BUILTIN_TRUTHS[name]()


def cmd_simulate(args: argparse.Namespace) -> int:
    """Write a simulated dataset, or with --replicates a replicate MSE table."""
    if args.replicates is None:
        sim = _simulation_config(args)
        data, _ = generate(sim)
        logging.info(
            f"Simulated setting {sim.setting}: {data.n_points} points x {sim.n_per_point} samples, "
            f"seed {sim.seed}"
        )
        write_frame(args.out, observations_frame(data))
        return EXIT_OK

    sim = _simulation_config(args, replicates=args.replicates)
    summaries = run_replicates(
        sim,
        parse_methods(args.methods),
        jobs=resolve_jobs(args.jobs),
        settings=ziss_settings(args),
    )
    write_frame(args.out, summary_frame(summaries))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    """Write replicate MSE tables over a grid of over-dispersion or shift values."""
    default = DEFAULT_OVERDISPERSION_GRID if args.parameter == "overdispersion" else DEFAULT_SHIFT_GRID
    sim = _simulation_config(args, replicates=args.replicates)
    results = run_sweep(
        sim,
        args.parameter,
        parse_values(args.values, default),
        parse_methods(args.methods),
        jobs=resolve_jobs(args.jobs),
        settings=ziss_settings(args),
    )
    write_frame(args.out, sweep_frame(args.parameter, results))
    return EXIT_OK


def _curves_path(args: argparse.Namespace) -> Path:
    if args.curves:
        return Path(args.curves)
    out = Path(args.out)
    return out.with_name(f"{out.stem}_curves.csv")


def cmd_fit(args: argparse.Namespace) -> int:
    """Bin an observation CSV, fit ZISS and write the fit JSON and curve CSV."""
    frame = read_observations(args.input)
    bins = args.bins if args.bins is not None else config.get("cli.bins", DEFAULT_BINS)
    data = bin_observations(frame, bins, parse_domain(args.domain))

    fit = fit_ziss(data, ziss_settings(args))
    write_json(args.out, fit_summary(fit, data))

    grid_points = config.get("cli.grid_points", DEFAULT_GRID_POINTS)
    truth = _builtin_truth(args.truth) if args.truth else None
    export = CurveExport.from_curves(fit.mean_curve, fit.dropout, grid_points, truth)
    write_frame(_curves_path(args), export.to_frame())

    logging.info(
        f"Fit: lambda={fit.lam:.4g}, {fit.iterations} EM iterations, converged={fit.converged}"
    )
    if not fit.converged:
        if not args.allow_nonconverged:
            raise NonConvergedFitError(fit.iterations)
        logging.warning("Keeping non-converged fit (--allow-nonconverged)")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Score a saved fit against a truth and write per-point squared errors."""
    mean_curve, _, summary = read_fit(args.fit)

    if args.truth in BUILTIN_TRUTHS:
        points = np.asarray(summary.get("points", []), dtype=float)
        if points.size == 0:
            raise DataValidationError(f"{args.fit}: fit document lists no points")
        mu_true = np.asarray(_builtin_truth(args.truth).mu_true(points), dtype=float)
        truth_name = args.truth
    else:
        table = read_truth_table(args.truth)
        points = table["t"].to_numpy()
        mu_true = table["mu_true"].to_numpy()
        truth_name = str(args.truth)

    mu_hat = mean_curve.mean(points)
    squared_error = (mu_hat - mu_true) ** 2
    mse = float(np.mean(squared_error))
    logging.info(f"MSE against {truth_name}: {mse:.6g} over {points.size} points")

    write_frame(args.out, pd.DataFrame({
        "t": points,
        "mu_hat": mu_hat,
        "mu_true": mu_true,
        "squared_error": squared_error,
    }))
    if args.summary:
        write_json(args.summary, {"truth": truth_name, "n_points": int(points.size), "mse": mse})
    return EXIT_OK
