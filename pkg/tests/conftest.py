"""Shared fixtures for the ZISS test suite."""

import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
if str(REPO_ROOT) not in sys.path:
    sys.path.insert(0, str(REPO_ROOT))

from core.config import config  # noqa: E402
from core.rkhs_spline import LambdaPolicy  # noqa: E402
from core.simulate import SimulationConfig, generate  # noqa: E402
from core.ziss_em import ZissConfig  # noqa: E402


@pytest.fixture
def fast_settings() -> ZissConfig:
    """GCV on a short grid; enough to exercise the selection step."""
    return ZissConfig(lambda_policy=LambdaPolicy(grid_size=7, grid_span=2.0))


@pytest.fixture
def fixed_settings() -> ZissConfig:
    return ZissConfig(lambda_policy=LambdaPolicy(mode="fixed"))


@pytest.fixture
def small_data():
    data, _ = generate(SimulationConfig(setting=1, n_points=15, n_per_point=20, seed=3))
    return data


@pytest.fixture
def setting1_data():
    return generate(SimulationConfig(setting=1, seed=11))


@pytest.fixture
def setting2_data():
    return generate(SimulationConfig(setting=2, seed=11))


@pytest.fixture
def reset_config():
    """Restore the shared configuration to the repository defaults after a test."""
    yield config
    config.load(str(REPO_ROOT / "config.yaml"))
