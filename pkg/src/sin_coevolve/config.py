"""
Run configuration.

Values merge in the order defaults <- JSON config file <- explicit flags.
The output-directory default comes from SIN_COEVOLVE_OUTPUT_DIR.
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError


def default_output_dir() -> str:
    return os.getenv("SIN_COEVOLVE_OUTPUT_DIR", "runs")


class RunConfig(BaseModel):
    """Every knob of a training, evaluation or curvature run."""
    model_config = ConfigDict(extra="forbid")

    data: Optional[str] = Field(default=None, description="Event-log path")
    dim: int = Field(default=64, ge=1, description="Embedding dimension")
    intervals: int = Field(default=300, ge=1, description="Number of training intervals")
    lr: float = Field(default=0.001, gt=0, description="Adam learning rate")
    epochs: int = Field(default=20, ge=0, description="Training epochs")
    eta: float = Field(default=2.0, ge=0, description="Hard-sample reweighing strength")
    w1: float = Field(default=1.0, ge=0, description="Item-side contrast weight")
    w2: float = Field(default=10.0, ge=0, description="Curvature loss weight")
    alpha: float = Field(default=0.5, ge=0, le=1, description="Lazy random-walk mass kept at a node")
    K: int = Field(default=1, ge=1, description="Shared counterparts needed for a co-occurrence edge")
    sample_ratio: float = Field(default=0.2, gt=0, le=1, description="Fraction of entities kept per subgraph")
    layers: int = Field(default=1, ge=1, description="Stacked aggregation layers")
    fusion: Literal["late", "early"] = Field(default="late", description="Interaction pooling order")
    encoder: Literal["cosine", "fourier"] = Field(default="cosine", description="Time encoder")
    curvature: Literal["evolve", "static", "zero"] = Field(default="evolve", description="Curvature mode")
    no_reweigh: bool = Field(default=False, description="Disable hard-sample reweighing")
    no_cocon: bool = Field(default=False, description="Drop counterpart-space positives")
    no_kernel: bool = Field(default=False, description="Exponential time decay instead of the encoder kernel")
    negatives: int = Field(default=16, ge=1, description="Negatives per anchor")
    full_negatives: bool = Field(default=False, description="Use every same-side entity as a negative")
    contrast_reduction: Literal["mean", "sum"] = Field(
        default="mean", description="Per-anchor reduction of the positive and negative contrast terms"
    )
    seed: int = Field(default=0, ge=0, description="Random seed")
    output_dir: str = Field(default_factory=default_output_dir, description="Run output directory")

    ricci_width: int = Field(default=64, ge=1, description="Curvature estimator input width")
    max_edges: int = Field(default=256, ge=1, description="Edges sampled per interval subgraph")
    curvature_iterations: int = Field(default=10, ge=1, description="Triangle samples per centre node")
    dropout: float = Field(default=0.3, ge=0, lt=1, description="Dropout on interaction embeddings")
    kappa_bound: float = Field(default=4.0, gt=0, description="Bound on |kappa| fed to the embeddings")
    attention: bool = Field(default=False, description="Tangent-space attention weights in gyromidpoints")
    workers: int = Field(default=1, ge=1, description="Curvature precompute threads")
    cache_size: int = Field(default=512, ge=1, description="In-memory curvature cache entries")

    @model_validator(mode="after")
    def _check_encoder_dim(self) -> "RunConfig":
        if self.encoder == "fourier" and self.dim % 2:
            raise ValueError("fourier encoder needs an even dim")
        return self

    @property
    def effective_eta(self) -> float:
        return 0.0 if self.no_reweigh else self.eta


def load_config(
    config_file: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """
    Merge a JSON config file and explicit overrides over the defaults.

    Raises:
        ConfigError: unreadable file, unknown keys or out-of-range values
    """
    merged: Dict[str, Any] = {}
    if config_file is not None:
        path = Path(config_file)
        try:
            merged.update(json.loads(path.read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(
                f"Cannot read config file {path}: {e}",
                details={"path": str(path)}
            ) from e
    merged.update({key: value for key, value in (overrides or {}).items() if value is not None})

    try:
        return RunConfig(**merged)
    except ValidationError as e:
        fields = [".".join(str(part) for part in err["loc"]) for err in e.errors()]
        raise ConfigError(
            f"Invalid configuration: {', '.join(fields) or e}",
            details={"fields": fields, "errors": [err["msg"] for err in e.errors()]}
        ) from e
