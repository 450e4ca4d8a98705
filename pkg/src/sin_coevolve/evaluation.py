"""
Future-interaction prediction.

A trained model is rolled forward over held-out events in chunks the size
of a training interval. Every event of a chunk is scored against all items
from the state before the chunk, then the chunk updates the state with the
parameters frozen.
"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import torch
from pydantic import BaseModel, Field

from .checkpoint import Checkpoint
from .contrast import clamp_kappa
from .curvature import SIDES
from .curvature_cache import CurvatureStore
from .data import Dataset, IntervalBatch, chrono_split, chunk_events
from .errors import ConfigError, EmptyInputError
from .geometry import as_tensor
from .logging_config import get_logger
from .model import CurvaturePair, EmbeddingTable, advance_interval, score_matrix

logger = get_logger(__name__, {"component": "evaluation"})

DEFAULT_KS = (1, 5, 10)


def mrr(ranks: Sequence[int]) -> float:
    """Mean reciprocal rank."""
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        raise EmptyInputError("MRR of an empty rank list")
    return float(np.mean(1.0 / ranks))


def recall_at_k(ranks: Sequence[int], k: int) -> float:
    """Fraction of ranks within the top k."""
    ranks = np.asarray(ranks)
    if ranks.size == 0:
        raise EmptyInputError("Recall of an empty rank list")
    if k < 1:
        raise ConfigError("k must be at least 1", details={"k": k})
    return float(np.mean(ranks <= k))


def rank_items(scores: torch.Tensor, truth: Union[np.ndarray, Sequence[int]]) -> np.ndarray:
    """
    Rank of each true item among all items, 1 is best.

    Ties go to the lower item id: rank = 1 + #(higher scores) + #(equal
    scores with a smaller id).
    """
    scores = scores.detach().cpu().numpy()
    truth = np.asarray(truth, dtype=np.int64)
    true_scores = scores[np.arange(truth.shape[0]), truth][:, None]
    ids = np.arange(scores.shape[1])[None, :]
    higher = (scores > true_scores).sum(axis=1)
    tied_before = ((scores == true_scores) & (ids < truth[:, None])).sum(axis=1)
    return 1 + higher + tied_before


class RankReport(BaseModel):
    """Per-event ranks of one split and their aggregates."""
    split: str
    ks: List[int]
    n_events: int
    n_skipped: int = 0
    event_index: List[int] = Field(default_factory=list)
    users: List[str] = Field(default_factory=list)
    items: List[str] = Field(default_factory=list)
    timestamps: List[float] = Field(default_factory=list)
    ranks: List[int] = Field(default_factory=list)
    mrr: float = 0.0
    recall: Dict[int, float] = Field(default_factory=dict)

    def summary(self) -> Dict[str, Union[str, int, float]]:
        row: Dict[str, Union[str, int, float]] = {
            "split": self.split,
            "n_events": self.n_events,
            "n_skipped": self.n_skipped,
            "mrr": self.mrr,
        }
        for k in self.ks:
            row[f"recall@{k}"] = self.recall[k]
        return row


def write_report(report: RankReport, output_dir: Union[str, Path]) -> Tuple[Path, Path]:
    """Write ``report.csv`` (one summary row) and ``ranks.csv`` (one row per scored event)."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    summary_path = output_dir / "report.csv"
    ranks_path = output_dir / "ranks.csv"
    pd.DataFrame([report.summary()]).to_csv(summary_path, index=False, lineterminator="\n")
    pd.DataFrame({
        "event_index": report.event_index,
        "user": report.users,
        "item": report.items,
        "t": report.timestamps,
        "rank": report.ranks,
    }).to_csv(ranks_path, index=False, lineterminator="\n")
    return summary_path, ranks_path


def select_split(ds: Dataset, split: str = "test") -> Tuple[Optional[Dataset], Dataset]:
    """
    Rollout events and scored events of a split.

    The test split first rolls through the validation events.
    """
    _, valid, test = chrono_split(ds)
    if split == "valid":
        return None, valid
    if split == "test":
        return valid, test
    raise ConfigError(f"Unknown split: {split}", details={"split": split})


def _to_checkpoint_ids(ds: Dataset, checkpoint: Checkpoint) -> Tuple[Dataset, np.ndarray, int]:
    """Events re-indexed to the checkpoint's ids; events with unknown entities dropped."""
    user_lookup = {label: index for index, label in enumerate(checkpoint.user_ids)}
    item_lookup = {label: index for index, label in enumerate(checkpoint.item_ids)}
    users = np.array([user_lookup.get(str(ds.user_ids[u]), -1) for u in ds.users], dtype=np.int64)
    items = np.array([item_lookup.get(str(ds.item_ids[i]), -1) for i in ds.items], dtype=np.int64)
    known = (users >= 0) & (items >= 0)
    positions = np.flatnonzero(known)
    remapped = ds.model_copy(update={
        "users": users[known],
        "items": items[known],
        "timestamps": ds.timestamps[known],
        "features": ds.features[known],
        "n_users": len(checkpoint.user_ids),
        "n_items": len(checkpoint.item_ids),
        "user_ids": np.asarray(checkpoint.user_ids),
        "item_ids": np.asarray(checkpoint.item_ids),
    })
    return remapped, positions, int((~known).sum())


class Evaluator:
    """Rolls a restored checkpoint over held-out events."""

    def __init__(self, checkpoint: Checkpoint, store: Optional[CurvatureStore] = None):
        self.checkpoint = checkpoint
        self.config = checkpoint.config
        self.model = checkpoint.model
        self.model.eval()
        self.store = store if store is not None else CurvatureStore.from_config(self.config)
        self.table: EmbeddingTable = checkpoint.table.clone()
        width = self.model.ricci_width
        self.ricci = {
            side: as_tensor(checkpoint.last_ricci.get(side) or [0.0] * width) for side in SIDES
        }
        self.next_index = checkpoint.train_intervals
        self.chunk_size = max(1, int(round(checkpoint.train_events / max(1, checkpoint.train_intervals))))

    def kappas(self, ricci: Dict[str, torch.Tensor]) -> CurvaturePair:
        """Curvatures implied by a pair of Ricci vectors under the run's curvature mode."""
        mode = self.config.curvature
        if mode == "zero":
            return CurvaturePair(kappa_u=0.0, kappa_i=0.0)
        if mode == "static" and self.checkpoint.static_kappa is not None:
            return self.checkpoint.static_kappa
        values = [
            clamp_kappa(float(self.model.estimate_curvature(ricci[side], side)), self.config.kappa_bound)
            for side in SIDES
        ]
        return CurvaturePair(kappa_u=values[0], kappa_i=values[1])

    def _update(self, chunk: IntervalBatch) -> None:
        ricci = {side: self.store.get(chunk, side).ricci_tensor() for side in SIDES}
        hidden = advance_interval(self.table, self.kappas(ricci))
        self.table = self.model.forward_interval(chunk, hidden).detach()
        self.ricci = ricci

    def rollout(self, ds: Dataset) -> int:
        """State-only pass over events; returns the number of skipped events."""
        remapped, _, skipped = _to_checkpoint_ids(ds, self.checkpoint)
        with torch.no_grad():
            for chunk in chunk_events(remapped, self.chunk_size, self.next_index):
                self._update(chunk)
                self.next_index += 1
        return skipped

    def score(self, ds: Dataset, split: str = "test", ks: Sequence[int] = DEFAULT_KS) -> RankReport:
        """Rank every event's true item, then let the event's chunk update the state."""
        remapped, positions, skipped = _to_checkpoint_ids(ds, self.checkpoint)
        if skipped:
            logger.warning(f"Skipped {skipped} {split} events with unknown users or items")
        ranks: List[np.ndarray] = []
        with torch.no_grad():
            for chunk in chunk_events(remapped, self.chunk_size, self.next_index):
                # predicted curvatures for this chunk come from the previous chunk
                scoring = advance_interval(self.table, self.kappas(self.ricci))
                scores = score_matrix(self.model, scoring, chunk.users, chunk.timestamps, decay=self.config.no_kernel)
                ranks.append(rank_items(scores, chunk.items))
                self._update(chunk)
                self.next_index += 1

        all_ranks = np.concatenate(ranks) if ranks else np.zeros(0, dtype=np.int64)
        ks = sorted(set(int(k) for k in ks))
        return RankReport(
            split=split,
            ks=ks,
            n_events=int(all_ranks.shape[0]),
            n_skipped=skipped,
            event_index=[int(p) for p in positions],
            users=[str(remapped.user_ids[u]) for u in remapped.users],
            items=[str(remapped.item_ids[i]) for i in remapped.items],
            timestamps=[float(t) for t in remapped.timestamps],
            ranks=[int(r) for r in all_ranks],
            mrr=mrr(all_ranks),
            recall={k: recall_at_k(all_ranks, k) for k in ks}
        )


def evaluate(
    checkpoint: Checkpoint,
    events: Dataset,
    ks: Sequence[int] = DEFAULT_KS,
    rollout: Optional[Dataset] = None,
    split: str = "test",
    store: Optional[CurvatureStore] = None
) -> RankReport:
    """
    Rank report of ``events`` for a trained checkpoint.

    Args:
        checkpoint: Restored model, table and curvature state
        events: Chronological events to score
        ks: Cut-offs of Recall@k
        rollout: Events replayed first without scoring
        split: Label of the scored split
        store: Curvature store for the evaluation chunks

    Raises:
        EmptyInputError: no scorable event
    """
    evaluator = Evaluator(checkpoint, store)
    skipped = evaluator.rollout(rollout) if rollout is not None and rollout.n_events else 0
    report = evaluator.score(events, split, ks)
    logger.info(
        f"{split}: MRR {report.mrr:.4f} over {report.n_events} events",
        extra={"n_skipped": report.n_skipped, "rollout_skipped": skipped}
    )
    return report
