"""
Model checkpoints as ordered JSON text.

Field order: format_version, config, dims, n_users, n_items, user_ids,
item_ids, parameters, table, curvature_history, static_kappa,
train_events, train_intervals, last_ricci. Parameter names are sorted and
floats keep their full repr, so equal runs give equal bytes.
"""

import hashlib
import json
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .config import RunConfig
from .errors import CheckpointMismatchError
from .geometry import as_tensor
from .logging_config import get_logger
from .model import CoEvolvingGNN, CurvaturePair, EmbeddingTable

logger = get_logger(__name__, {"component": "checkpoint"})

CHECKPOINT_FORMAT_VERSION = 1


def _nan_to_none(values: np.ndarray) -> List[Optional[float]]:
    return [None if np.isnan(v) else float(v) for v in values]


def _none_to_nan(values: List[Optional[float]]) -> np.ndarray:
    return np.array([np.nan if v is None else v for v in values], dtype=np.float64)


def checkpoint_payload(result: Any) -> "OrderedDict[str, Any]":
    """Ordered checkpoint fields of a TrainResult."""
    model: CoEvolvingGNN = result.model
    table: EmbeddingTable = result.table
    payload: "OrderedDict[str, Any]" = OrderedDict()
    payload["format_version"] = CHECKPOINT_FORMAT_VERSION
    # the output location is not part of the trained state
    payload["config"] = result.config.model_dump(exclude={"output_dir"})
    payload["dims"] = OrderedDict([
        ("dim", model.dim),
        ("d_x", model.feature_dim),
        ("d_user_features", result.d_user_features),
        ("d_item_features", result.d_item_features),
        ("ricci_width", model.ricci_width),
    ])
    payload["n_users"] = model.n_users
    payload["n_items"] = model.n_items
    payload["user_ids"] = list(result.user_ids)
    payload["item_ids"] = list(result.item_ids)
    state = model.state_dict()
    payload["parameters"] = OrderedDict(
        (name, state[name].detach().cpu().tolist()) for name in sorted(state)
    )
    payload["table"] = OrderedDict([
        ("users", table.users.detach().tolist()),
        ("items", table.items.detach().tolist()),
        ("kappa_u", table.kappa_u),
        ("kappa_i", table.kappa_i),
        ("last_t_user", _nan_to_none(table.last_t_user)),
        ("last_t_item", _nan_to_none(table.last_t_item)),
    ])
    payload["curvature_history"] = [
        OrderedDict([("interval", pair.interval), ("kappa_u", pair.kappa_u), ("kappa_i", pair.kappa_i)])
        for pair in result.curvature_history
    ]
    payload["static_kappa"] = None if result.static_kappa is None else OrderedDict([
        ("kappa_u", result.static_kappa.kappa_u),
        ("kappa_i", result.static_kappa.kappa_i),
    ])
    payload["train_events"] = result.train_events
    payload["train_intervals"] = result.train_intervals
    payload["last_ricci"] = OrderedDict(
        (side, list(result.last_ricci.get(side, []))) for side in ("user", "item")
    )
    return payload


def save_checkpoint(path: Union[str, Path], result: Any) -> str:
    """
    Write a checkpoint and return the sha256 hex digest of its bytes.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = (json.dumps(checkpoint_payload(result)) + "\n").encode("utf-8")
    path.write_bytes(data)
    digest = hashlib.sha256(data).hexdigest()
    logger.info(f"Saved checkpoint {path}", extra={"digest": digest})
    return digest


def checkpoint_digest(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Checkpoint(BaseModel):
    """A restored model with everything evaluation needs."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: RunConfig
    model: CoEvolvingGNN
    table: EmbeddingTable
    user_ids: List[str]
    item_ids: List[str]
    curvature_history: List[CurvaturePair] = Field(default_factory=list)
    static_kappa: Optional[CurvaturePair] = None
    train_events: int
    train_intervals: int
    last_ricci: Dict[str, List[float]] = Field(default_factory=dict)


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Read a checkpoint back into a model in eval mode.

    Raises:
        CheckpointMismatchError: missing or unreadable file, unknown format
            version or inconsistent parameter shapes
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointMismatchError(f"Cannot read checkpoint {path}: {e}", details={"path": str(path)}) from e
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointMismatchError(
            f"Unsupported checkpoint format version {payload.get('format_version')}",
            details={"path": str(path), "expected": CHECKPOINT_FORMAT_VERSION}
        )

    config = RunConfig(**payload["config"])
    dims = payload["dims"]
    model = CoEvolvingGNN(
        n_users=payload["n_users"],
        n_items=payload["n_items"],
        dim=dims["dim"],
        feature_dim=dims["d_x"],
        ricci_width=dims["ricci_width"],
        encoder=config.encoder,
        fusion=config.fusion,
        layers=config.layers,
        dropout=config.dropout,
        attention=config.attention,
        seed=config.seed
    )
    try:
        model.load_state_dict(OrderedDict(
            (name, as_tensor(values)) for name, values in payload["parameters"].items()
        ))
    except RuntimeError as e:
        raise CheckpointMismatchError(f"Checkpoint parameters do not fit the model: {e}", details={"path": str(path)}) from e
    model.eval()

    stored = payload["table"]
    table = EmbeddingTable(
        users=as_tensor(stored["users"]).reshape(payload["n_users"], dims["dim"]),
        items=as_tensor(stored["items"]).reshape(payload["n_items"], dims["dim"]),
        kappa_u=stored["kappa_u"],
        kappa_i=stored["kappa_i"],
        last_t_user=_none_to_nan(stored["last_t_user"]),
        last_t_item=_none_to_nan(stored["last_t_item"])
    )
    static = payload.get("static_kappa")
    return Checkpoint(
        config=config,
        model=model,
        table=table,
        user_ids=payload["user_ids"],
        item_ids=payload["item_ids"],
        curvature_history=[CurvaturePair(**entry) for entry in payload["curvature_history"]],
        static_kappa=None if static is None else CurvaturePair(**static),
        train_events=payload["train_events"],
        train_intervals=payload["train_intervals"],
        last_ricci=payload["last_ricci"]
    )

