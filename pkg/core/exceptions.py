"""
Custom Exception Classes

Defines the exception hierarchy for the ZISS package. Every exception carries
the process exit code the command line maps it to.
"""

from typing import Iterable, Optional

from .constants import EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO


class ZissError(Exception):
    """Base exception class for all ZISS errors."""
    exit_code: int = EXIT_NUMERICAL


# ============================================================================
# Validation Errors
# ============================================================================

class ValidationError(ZissError):
    """Base class for invalid input of any kind."""
    exit_code = EXIT_VALIDATION


class InvalidArgumentError(ValidationError):
    """Raised when an operation receives arguments outside its contract."""
    pass


class DomainError(ValidationError):
    """Raised when a point lies outside the domain of a curve or kernel."""

    def __init__(self, message: str, value: Optional[float] = None):
        self.value = value
        super().__init__(message)


class DataValidationError(ValidationError):
    """Raised when input data rows are malformed."""

    def __init__(self, message: str, lines: Iterable[int] = ()):
        self.lines = sorted(set(lines))
        if self.lines:
            shown = ", ".join(str(n) for n in self.lines[:20])
            if len(self.lines) > 20:
                shown += f", ... ({len(self.lines)} lines)"
            message = f"{message} (line {shown})"
        super().__init__(message)


class DegenerateDataError(ValidationError):
    """Raised when the data carry too little information to fit a curve."""
    pass


class ConfigurationError(ValidationError):
    """Raised for configuration-related errors."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"Configuration error for '{key}': {message}")


# ============================================================================
# Numerical Errors
# ============================================================================

class NumericalError(ZissError):
    """Base class for numerical failures."""
    exit_code = EXIT_NUMERICAL


class SingularSystemError(NumericalError):
    """Raised when a penalized least-squares system has no unique solution."""
    pass


class ConvergenceError(NumericalError):
    """Raised when an iterative solver exhausts its iteration budget."""

    def __init__(self, solver: str, iterations: int, criterion: float):
        self.solver = solver
        self.iterations = iterations
        self.criterion = criterion
        super().__init__(
            f"{solver}: no convergence after {iterations} iterations "
            f"(final criterion {criterion:.3e})"
        )


class IllConditionedError(NumericalError):
    """Raised when a Hessian stays indefinite after the ridge fallback."""
    pass


class NonConvergedFitError(NumericalError):
    """Raised by the CLI when the EM loop did not converge."""

    def __init__(self, iterations: int):
        self.iterations = iterations
        super().__init__(
            f"EM did not converge in {iterations} iterations "
            f"(use --allow-nonconverged to keep the result)"
        )


# ============================================================================
# Storage Errors
# ============================================================================

class StorageError(ZissError):
    """Raised for file read/write errors."""
    exit_code = EXIT_IO

    def __init__(self, filepath: str, message: str):
        self.filepath = filepath
        super().__init__(f"{filepath}: {message}")


# ============================================================================
# Worker Errors
# ============================================================================

class WorkerError(ZissError):
    """Base class for worker-related errors."""
    exit_code = EXIT_NUMERICAL


class WorkerCrashError(WorkerError):
    """Raised when a worker process dies before answering."""

    def __init__(self, worker_id: int, message: str = "Worker crashed"):
        self.worker_id = worker_id
        super().__init__(f"Worker {worker_id}: {message}")


class WorkerTimeoutError(WorkerError):
    """Raised when no worker answers in time."""

    def __init__(self, timeout: float):
        self.timeout = timeout
        super().__init__(f"No replicate response after {timeout}s")
