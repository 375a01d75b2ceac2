"""Tests for the configuration layer."""

import pytest

from core.config import Config
from core.exceptions import ConfigurationError
from core.rkhs_spline import LambdaPolicy
from core.simulate import SimulationConfig
from core.ziss_em import ZissConfig

pytestmark = pytest.mark.usefixtures("reset_config")


class TestConfig:
    def test_singleton(self, reset_config) -> None:
        assert Config() is reset_config

    def test_defaults_without_file(self, reset_config, tmp_path) -> None:
        reset_config.load(str(tmp_path / "missing.yaml"))
        assert reset_config.get("ziss.basis_m") == 6
        assert reset_config.get("newton.poisson_tol") == 1e-8
        assert reset_config.get("simulation.jobs") is None
        assert reset_config.get("no.such.key", 5) == 5

    def test_partial_file_merges(self, reset_config, tmp_path) -> None:
        path = tmp_path / "c.yaml"
        path.write_text("ziss:\n  basis_m: 8\n  lambda_policy: fixed\nsimulation:\n  seed: 3\n")
        reset_config.load(str(path))
        assert reset_config.get("ziss.basis_m") == 8
        assert reset_config.get("ziss.epsilon") == 1e-4
        assert ZissConfig.from_config().basis_m == 8
        assert LambdaPolicy.from_config().mode == "fixed"
        assert LambdaPolicy.from_config().max_extensions == 2
        assert SimulationConfig.from_config().seed == 3

    @pytest.mark.parametrize(
        "text",
        [
            "ziss: [1, 2\n",
            "- just\n- a list\n",
            "ziss:\n  epsilon: 0\n",
            "ziss:\n  lambda_policy: aic\n",
            "ziss:\n  basis_m: 3\n",
            "cli:\n  bins: -1\n",
            "simulation:\n  jobs: 0\n",
            "simulation:\n  truth_convention: both\n",
            "ziss:\n  lambda_grid_extensions: -1\n",
        ],
    )
    def test_invalid_files(self, reset_config, tmp_path, text: str) -> None:
        path = tmp_path / "c.yaml"
        path.write_text(text)
        with pytest.raises(ConfigurationError):
            reset_config.load(str(path))

    def test_invalid_override(self) -> None:
        with pytest.raises(ConfigurationError):
            ZissConfig.from_config(epsilon=-1.0)
        with pytest.raises(ConfigurationError):
            SimulationConfig.from_config(n_points=1)
