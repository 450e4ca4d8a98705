"""
Tests for run configuration and the error hierarchy.
"""

import json

import pytest

from sin_coevolve.config import RunConfig, load_config
from sin_coevolve.errors import (
    EXIT_DATA,
    EXIT_RUNTIME,
    EXIT_USAGE,
    CheckpointMismatchError,
    ConfigError,
    DataFormatError,
    DivergenceError,
    SinError,
    exit_code_for,
)


class TestRunConfig:
    """Test suite for RunConfig and load_config."""

    def test_defaults(self):
        config = RunConfig()
        assert config.dim == 64
        assert config.intervals == 300
        assert config.lr == 0.001
        assert config.eta == 2.0
        assert config.w1 == 1.0
        assert config.w2 == 10.0
        assert config.alpha == 0.5
        assert config.K == 1
        assert config.sample_ratio == 0.2
        assert config.fusion == "late"
        assert config.encoder == "cosine"
        assert config.curvature == "evolve"

    def test_output_dir_from_environment(self, monkeypatch):
        monkeypatch.setenv("SIN_COEVOLVE_OUTPUT_DIR", "/tmp/elsewhere")
        assert RunConfig().output_dir == "/tmp/elsewhere"

    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"dim": 16, "eta": 1.0, "encoder": "fourier"}), encoding="utf-8")
        config = load_config(path, {"eta": 3.0, "lr": None})
        assert config.dim == 16
        assert config.eta == 3.0
        assert config.lr == 0.001
        assert config.encoder == "fourier"

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"dimension": 16}), encoding="utf-8")
        with pytest.raises(ConfigError) as exc_info:
            load_config(path)
        assert "dimension" in exc_info.value.details["fields"]

    def test_out_of_range(self):
        with pytest.raises(ConfigError):
            load_config(overrides={"alpha": 1.5})
        with pytest.raises(ConfigError):
            load_config(overrides={"curvature": "wobbly"})

    def test_fourier_needs_even_dim(self):
        with pytest.raises(ConfigError):
            load_config(overrides={"encoder": "fourier", "dim": 5})

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(broken)

    def test_effective_eta(self):
        assert RunConfig(eta=2.0).effective_eta == 2.0
        assert RunConfig(eta=2.0, no_reweigh=True).effective_eta == 0.0


class TestErrors:
    """Test suite for error codes and exit codes."""

    def test_to_dict(self):
        error = SinError("boom", code="CUSTOM", details={"x": 1})
        assert error.to_dict() == {
            "success": False,
            "error": {"code": "CUSTOM", "message": "boom", "details": {"x": 1}}
        }

    def test_class_codes(self):
        assert DataFormatError("x").code == "DATA_FORMAT"
        assert DataFormatError("x", code="NO_EVENTS").code == "NO_EVENTS"
        assert DataFormatError("x").code == "DATA_FORMAT"

    def test_exit_codes(self):
        assert exit_code_for(ConfigError("x")) == EXIT_USAGE
        assert exit_code_for(DataFormatError("x")) == EXIT_DATA
        assert exit_code_for(CheckpointMismatchError("x")) == EXIT_DATA
        assert exit_code_for(DivergenceError("x")) == EXIT_RUNTIME
        assert exit_code_for(RuntimeError("x")) == EXIT_RUNTIME
