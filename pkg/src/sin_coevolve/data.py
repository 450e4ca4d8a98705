"""
Event-log ingestion, chronological splitting, interval batching and
synthetic interaction networks.

Event-log format: UTF-8 text, one header line, comma separated
``user_id,item_id,timestamp[,state_label],f1,...,fk``. The state label is
present when the fourth header field names a label; it is parsed and
ignored.
"""

import hashlib
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from .errors import ConfigError, DataFormatError
from .logging_config import get_logger

logger = get_logger(__name__, {"component": "data"})


class InteractionEvent(BaseModel):
    """One (user, item, time, attributes) interaction."""
    user: int
    item: int
    t: float = Field(ge=0)
    features: List[float] = Field(default_factory=list)


class Dataset(BaseModel):
    """Time-sorted interaction events with dense user and item ids."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    users: np.ndarray
    items: np.ndarray
    timestamps: np.ndarray
    features: np.ndarray
    n_users: int
    n_items: int
    user_ids: np.ndarray = Field(description="Original label of each dense user id")
    item_ids: np.ndarray = Field(description="Original label of each dense item id")
    user_features: Optional[np.ndarray] = None
    item_features: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @property
    def n_events(self) -> int:
        return int(self.users.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    def __len__(self) -> int:
        return self.n_events

    def event(self, index: int) -> InteractionEvent:
        return InteractionEvent(
            user=int(self.users[index]),
            item=int(self.items[index]),
            t=float(self.timestamps[index]),
            features=self.features[index].tolist()
        )

    def slice(self, start: int, stop: int) -> "Dataset":
        """Contiguous event range sharing the id maps of this dataset."""
        return self.model_copy(update={
            "users": self.users[start:stop],
            "items": self.items[start:stop],
            "timestamps": self.timestamps[start:stop],
            "features": self.features[start:stop],
        })

    def mean_gap(self) -> float:
        """Mean time between consecutive events, 1.0 when undefined."""
        if self.n_events < 2:
            return 1.0
        gap = float(self.timestamps[-1] - self.timestamps[0]) / (self.n_events - 1)
        return gap if gap > 0 else 1.0


class IntervalBatch(BaseModel):
    """A contiguous slice of events forming one time interval."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    index: int
    t_start: float
    t_end: float
    start: int
    stop: int
    users: np.ndarray
    items: np.ndarray
    timestamps: np.ndarray
    features: np.ndarray

    @property
    def n_events(self) -> int:
        return int(self.users.shape[0])

    def fingerprint(self) -> str:
        """Content digest of the interval's interactions."""
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.users, dtype=np.int64).tobytes())
        digest.update(np.ascontiguousarray(self.items, dtype=np.int64).tobytes())
        return digest.hexdigest()[:16]


def _remap(column: pd.Series) -> Tuple[np.ndarray, np.ndarray]:
    numeric = pd.to_numeric(column, errors="coerce")
    labels = numeric if not numeric.isna().any() else column
    codes, uniques = pd.factorize(labels, sort=True)
    return codes.astype(np.int64), np.asarray(uniques)


def parse(path: Union[str, Path]) -> Dataset:
    """
    Load and validate an event log.

    Args:
        path: Event-log file

    Returns:
        Dataset with ids remapped to dense ranges and events sorted by time

    Raises:
        DataFormatError: missing file, no events, malformed row or
            feature-width mismatch (with the 1-based line number)
    """
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(
            f"Data file not found: {path}",
            code="FILE_NOT_FOUND",
            details={"path": str(path)}
        )

    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise DataFormatError(
            f"Data file is not valid UTF-8: {path}",
            code="INVALID_ENCODING",
            details={"path": str(path), "offset": e.start}
        ) from e

    lines = pd.Series(text.splitlines())
    lines.index = np.arange(1, len(lines) + 1)
    if lines.empty:
        raise DataFormatError("no events", code="NO_EVENTS", details={"path": str(path)})

    header = [field.strip().lower() for field in lines.iloc[0].split(",")]
    has_label = len(header) > 3 and "label" in header[3]
    body = lines.iloc[1:]
    body = body[body.str.strip() != ""]
    if body.empty:
        raise DataFormatError("no events", code="NO_EVENTS", details={"path": str(path)})

    fields = body.str.split(",")
    widths = fields.str.len()
    expected = int(widths.iloc[0])
    min_width = 4 if has_label else 3
    bad_width = widths[(widths != expected) | (widths < min_width)]
    if not bad_width.empty:
        line = int(bad_width.index[0])
        raise DataFormatError(
            f"Line {line}: expected {expected} fields, found {int(bad_width.iloc[0])}",
            code="FEATURE_WIDTH_MISMATCH",
            details={"path": str(path), "line": line, "expected": expected, "found": int(bad_width.iloc[0])}
        )

    table = pd.DataFrame(fields.tolist(), index=fields.index).apply(lambda col: col.str.strip())
    feature_start = 4 if has_label else 3
    numeric_cols = [2] + list(range(feature_start, expected))
    values = table[numeric_cols].apply(pd.to_numeric, errors="coerce")
    invalid = values.isna().any(axis=1) | (values[2] < 0) | (table[0] == "") | (table[1] == "")
    if invalid.any():
        line = int(invalid[invalid].index[0])
        raise DataFormatError(
            f"Line {line}: malformed row",
            code="MALFORMED_ROW",
            details={"path": str(path), "line": line, "row": lines[line]}
        )

    timestamps = values[2].to_numpy(dtype=np.float64)
    order = np.argsort(timestamps, kind="stable")
    if not np.all(np.diff(timestamps) >= 0):
        logger.warning(
            f"Timestamps in {path} are not sorted; reordering {len(order)} events",
            extra={"path": str(path)}
        )

    users, user_ids = _remap(table[0])
    items, item_ids = _remap(table[1])
    features = values[list(range(feature_start, expected))].to_numpy(dtype=np.float64)

    dataset = Dataset(
        users=users[order],
        items=items[order],
        timestamps=timestamps[order],
        features=features[order].reshape(len(order), expected - feature_start),
        n_users=len(user_ids),
        n_items=len(item_ids),
        user_ids=user_ids,
        item_ids=item_ids
    )
    logger.info(
        f"Parsed {dataset.n_events} events ({dataset.n_users} users, {dataset.n_items} items, "
        f"{dataset.feature_dim} features) from {path}"
    )
    return dataset


def write(ds: Dataset, path: Union[str, Path]) -> Path:
    """Write a dataset as an event log using the original id labels."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({
        "user_id": ds.user_ids[ds.users],
        "item_id": ds.item_ids[ds.items],
        "timestamp": ds.timestamps,
        "state_label": np.zeros(ds.n_events, dtype=np.int64),
    })
    for j in range(ds.feature_dim):
        frame[f"f{j + 1}"] = ds.features[:, j]
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def chrono_split(
    ds: Dataset,
    fractions: Sequence[float] = (0.8, 0.1, 0.1)
) -> Tuple[Dataset, Dataset, Dataset]:
    """Contiguous chronological train/valid/test slices by event count."""
    if ds.n_events < 3:
        raise DataFormatError(
            "Dataset needs at least 3 events to split",
            code="DATASET_TOO_SMALL",
            details={"n_events": ds.n_events}
        )
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or fractions[0] <= 0 \
            or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(
            "Split fractions must be three non-negative values summing to 1",
            details={"fractions": list(fractions)}
        )
    n = ds.n_events
    n_train = min(n, int(np.floor(fractions[0] * n + 0.5)))
    n_valid = min(n - n_train, int(np.floor(fractions[1] * n + 0.5)))
    return ds.slice(0, n_train), ds.slice(n_train, n_train + n_valid), ds.slice(n_train + n_valid, n)


def interval_partition(ds: Dataset, n_intervals: int) -> List[IntervalBatch]:
    """
    Equal-count interval batches; the last one absorbs the remainder.

    Each batch covers [t_start, t_end) with t_end just above its last event.
    """
    if n_intervals < 1:
        raise ConfigError("n_intervals must be at least 1", details={"n_intervals": n_intervals})
    count = ds.n_events
    if count == 0:
        return []
    if n_intervals > count:
        logger.warning(
            f"Requested {n_intervals} intervals for {count} events; using {count}",
            extra={"n_intervals": n_intervals, "n_events": count}
        )
        n_intervals = count

    size = count // n_intervals
    bounds = [i * size for i in range(n_intervals)] + [count]
    batches = []
    for index in range(n_intervals):
        start, stop = bounds[index], bounds[index + 1]
        batches.append(IntervalBatch(
            index=index,
            t_start=float(ds.timestamps[start]),
            t_end=float(np.nextafter(ds.timestamps[stop - 1], np.inf)),
            start=start,
            stop=stop,
            users=ds.users[start:stop],
            items=ds.items[start:stop],
            timestamps=ds.timestamps[start:stop],
            features=ds.features[start:stop]
        ))
    return batches


def chunk_events(ds: Dataset, size: int, first_index: int = 0) -> List[IntervalBatch]:
    """Fixed-size consecutive batches, the last one possibly shorter."""
    size = max(1, int(size))
    n_chunks = max(1, -(-ds.n_events // size)) if ds.n_events else 0
    batches = []
    for offset in range(n_chunks):
        start, stop = offset * size, min(ds.n_events, (offset + 1) * size)
        batches.append(IntervalBatch(
            index=first_index + offset,
            t_start=float(ds.timestamps[start]),
            t_end=float(np.nextafter(ds.timestamps[stop - 1], np.inf)),
            start=start,
            stop=stop,
            users=ds.users[start:stop],
            items=ds.items[start:stop],
            timestamps=ds.timestamps[start:stop],
            features=ds.features[start:stop]
        ))
    return batches


def synth_generate(
    n_users: int = 50,
    n_items: int = 50,
    n_clusters: int = 5,
    n_events: int = 5000,
    noise: float = 0.1,
    seed: int = 0,
    n_features: int = 0,
    t_max: float = 10000.0
) -> Dataset:
    """
    Planted-cluster interaction network.

    Users and items are dealt evenly into clusters. Each event draws a user
    uniformly and, with probability 1 - noise, an item of the user's cluster,
    otherwise any item. Timestamps are uniform on [0, t_max) and sorted.
    """
    if min(n_users, n_items, n_clusters, n_events) < 1 or n_features < 0 or t_max <= 0:
        raise DataFormatError(
            "Synthetic sizes must be positive",
            code="INVALID_SIZES",
            details={"n_users": n_users, "n_items": n_items, "n_clusters": n_clusters,
                     "n_events": n_events, "n_features": n_features}
        )
    if n_clusters > min(n_users, n_items):
        raise DataFormatError(
            "n_clusters cannot exceed the number of users or items",
            code="INVALID_SIZES",
            details={"n_clusters": n_clusters, "n_users": n_users, "n_items": n_items}
        )
    if not 0 <= noise <= 1:
        raise DataFormatError("noise must lie in [0, 1]", code="INVALID_SIZES", details={"noise": noise})

    rng = np.random.default_rng(seed)
    user_cluster = rng.permutation(np.arange(n_users) % n_clusters)
    item_cluster = rng.permutation(np.arange(n_items) % n_clusters)

    items_by_cluster = np.argsort(item_cluster, kind="stable")
    cluster_sizes = np.bincount(item_cluster, minlength=n_clusters)
    cluster_offsets = np.concatenate([[0], np.cumsum(cluster_sizes)[:-1]])

    users = rng.integers(0, n_users, size=n_events)
    clusters = user_cluster[users]
    picks = (rng.random(n_events) * cluster_sizes[clusters]).astype(np.int64)
    intra_items = items_by_cluster[cluster_offsets[clusters] + picks]
    uniform_items = rng.integers(0, n_items, size=n_events)
    items = np.where(rng.random(n_events) < noise, uniform_items, intra_items)

    timestamps = np.sort(rng.uniform(0.0, t_max, size=n_events))
    features = rng.normal(size=(n_events, n_features))

    return Dataset(
        users=users.astype(np.int64),
        items=items.astype(np.int64),
        timestamps=timestamps,
        features=features,
        n_users=n_users,
        n_items=n_items,
        user_ids=np.arange(n_users),
        item_ids=np.arange(n_items),
        metadata={
            "user_cluster": user_cluster.tolist(),
            "item_cluster": item_cluster.tolist(),
            "seed": seed,
            "noise": noise,
        }
    )
