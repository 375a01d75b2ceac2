import copy
import os
from typing import Any, Optional, Dict
import yaml
import logging
from .constants import (
    DEFAULT_BASIS_M,
    DEFAULT_BASIS_DEGREE,
    DEFAULT_EPSILON,
    DEFAULT_EM_MAX_ITER,
    DEFAULT_LAMBDA_GRID_SIZE,
    DEFAULT_LAMBDA_GRID_SPAN,
    DEFAULT_LAMBDA_GRID_EXTENSIONS,
    DEFAULT_TRUTH_CONVENTION,
    TRUTH_CONVENTIONS,
    MAX_REPRESENTER_KNOTS,
    DROPOUT_MAX_ITER,
    DROPOUT_TOL,
    POISSON_MAX_ITER,
    POISSON_TOL,
    MAX_STEP_HALVINGS,
    DEFAULT_N_POINTS,
    DEFAULT_N_PER_POINT,
    DEFAULT_REPLICATES,
    DEFAULT_BINS,
    DEFAULT_GRID_POINTS,
)
from .exceptions import ConfigurationError

CONFIG_ENV_VAR = "ZISS_CONFIG"

DEFAULT_CONFIG: Dict[str, Any] = {
    "ziss": {
        "basis_m": DEFAULT_BASIS_M,
        "degree": DEFAULT_BASIS_DEGREE,
        "epsilon": DEFAULT_EPSILON,
        "max_iter": DEFAULT_EM_MAX_ITER,
        "lambda_policy": "gcv",
        "lambda_grid_size": DEFAULT_LAMBDA_GRID_SIZE,
        "lambda_grid_span": DEFAULT_LAMBDA_GRID_SPAN,
        "lambda_grid_extensions": DEFAULT_LAMBDA_GRID_EXTENSIONS,
        "max_knots": MAX_REPRESENTER_KNOTS,
    },
    "newton": {
        "dropout_max_iter": DROPOUT_MAX_ITER,
        "dropout_tol": DROPOUT_TOL,
        "poisson_max_iter": POISSON_MAX_ITER,
        "poisson_tol": POISSON_TOL,
        "max_step_halvings": MAX_STEP_HALVINGS,
    },
    "simulation": {
        "n_points": DEFAULT_N_POINTS,
        "n_per_point": DEFAULT_N_PER_POINT,
        "replicates": DEFAULT_REPLICATES,
        "seed": 0,
        "truth_convention": DEFAULT_TRUTH_CONVENTION,
        "jobs": None,
    },
    "cli": {
        "bins": DEFAULT_BINS,
        "grid_points": DEFAULT_GRID_POINTS,
    },
    "logging": {
        "level": "INFO",
        "file": None,
    },
}

# Keys that must be positive numbers, by dot path
_POSITIVE_KEYS = (
    "ziss.basis_m",
    "ziss.epsilon",
    "ziss.max_iter",
    "ziss.lambda_grid_size",
    "ziss.max_knots",
    "newton.dropout_max_iter",
    "newton.dropout_tol",
    "newton.poisson_max_iter",
    "newton.poisson_tol",
    "simulation.n_points",
    "simulation.n_per_point",
    "simulation.replicates",
    "cli.grid_points",
)


class Config:
    """
    Application configuration manager with singleton pattern.

    Loads configuration from a YAML file and provides dot-notation access
    to nested configuration values. Merges user configuration with defaults.

    Example:
        >>> config = Config()
        >>> m = config.get('ziss.basis_m')
        >>> jobs = config.get('simulation.jobs', default=1)
    """

    _instance: Optional['Config'] = None

    def __new__(cls) -> 'Config':
        if cls._instance is None:
            cls._instance = super(Config, cls).__new__(cls)
            cls._instance.data = copy.deepcopy(DEFAULT_CONFIG)
            cls._instance.path = None
            cls._instance.load(os.environ.get(CONFIG_ENV_VAR, "config.yaml"))
        return cls._instance

    def load(self, config_path: str = "config.yaml") -> None:
        """
        Load configuration from YAML file, merging with defaults.

        Args:
            config_path: Path to YAML configuration file

        Raises:
            ConfigurationError: If config file is malformed or holds invalid values
        """
        self.data = copy.deepcopy(DEFAULT_CONFIG)
        self.path = None
        if os.path.exists(config_path):
            try:
                with open(config_path, 'r', encoding='utf-8') as f:
                    user_config = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ConfigurationError(config_path, f"Malformed YAML: {e}") from e
            except OSError as e:
                raise ConfigurationError(config_path, f"Unreadable: {e}") from e
            if user_config:
                if not isinstance(user_config, dict):
                    raise ConfigurationError(
                        config_path,
                        "Configuration file must contain a dictionary"
                    )
                self._merge(self.data, user_config)
            self.path = config_path
            logging.debug(f"Loaded configuration from {config_path}")
        else:
            logging.debug("No config file found, using defaults")

        self._validate()

    def _validate(self) -> None:
        """Reject values the numerics cannot work with."""
        for path in _POSITIVE_KEYS:
            value = self.get(path)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
                raise ConfigurationError(path, f"must be a positive number, got {value!r}")

        degree = self.get("ziss.degree")
        if isinstance(degree, bool) or not isinstance(degree, int) or degree < 0:
            raise ConfigurationError("ziss.degree", f"must be a non-negative integer, got {degree!r}")
        if self.get("ziss.basis_m") < degree + 1:
            raise ConfigurationError("ziss.basis_m", "must be at least degree + 1")

        extensions = self.get("ziss.lambda_grid_extensions")
        if isinstance(extensions, bool) or not isinstance(extensions, int) or extensions < 0:
            raise ConfigurationError(
                "ziss.lambda_grid_extensions", f"must be a non-negative integer, got {extensions!r}"
            )

        policy = self.get("ziss.lambda_policy")
        if policy not in ("gcv", "fixed"):
            raise ConfigurationError("ziss.lambda_policy", f"must be 'gcv' or 'fixed', got {policy!r}")

        bins = self.get("cli.bins")
        if isinstance(bins, bool) or not isinstance(bins, int) or bins < 0:
            raise ConfigurationError("cli.bins", f"must be a non-negative integer, got {bins!r}")

        convention = self.get("simulation.truth_convention")
        if convention not in TRUTH_CONVENTIONS:
            raise ConfigurationError(
                "simulation.truth_convention",
                f"must be one of {', '.join(TRUTH_CONVENTIONS)}, got {convention!r}",
            )

        jobs = self.get("simulation.jobs")
        if jobs is not None and (not isinstance(jobs, int) or jobs < 1):
            raise ConfigurationError("simulation.jobs", f"must be null or a positive integer, got {jobs!r}")

    def _merge(self, default: Dict[str, Any], user: Dict[str, Any]) -> None:
        """
        Recursively merge user configuration into default configuration.

        Args:
            default: Default configuration dictionary (modified in place)
            user: User configuration to merge
        """
        for k, v in user.items():
            if isinstance(v, dict) and k in default and isinstance(default[k], dict):
                self._merge(default[k], v)
            else:
                default[k] = v

    def get(self, path: str, default: Any = None) -> Any:
        """
        Get configuration value using dot notation.

        Args:
            path: Dot-separated path to configuration value (e.g., 'ziss.epsilon')
            default: Default value if path not found

        Returns:
            Configuration value at path, or default if not found

        Example:
            >>> config.get('newton.poisson_tol', default=1e-8)
            1e-08
        """
        keys = path.split('.')
        val = self.data
        try:
            for k in keys:
                val = val[k]
            return val
        except (KeyError, TypeError):
            return default


# Global instance
config = Config()
