"""
Self-supervised training of the co-evolving network.

Each interval contrasts the current forward pass (the alpha view) with the
previous interval's embeddings carried onto the current manifolds (the beta
view). Anchors pull toward themselves in the other view and toward the
cross-space images of their interaction counterparts, and push away from
sampled same-side entities, with hard samples up-weighted. A curvature term
fits each side's estimator to the observed curvature of the interval.
"""

import math
import os
import time
import uuid
from pathlib import Path
from typing import Callable, Dict, List, Literal, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import psutil
import torch
from pydantic import BaseModel, ConfigDict, Field

from .checkpoint import save_checkpoint
from .config import RunConfig
from .curvature import SIDES, curvature_loss
from .curvature_cache import CurvatureRecord, CurvatureStore
from .data import Dataset, IntervalBatch, chunk_events, interval_partition
from .diffengine import DTYPE, PRIMITIVES, Tape, backward, register_primitive
from .errors import CurvatureMismatchError, DivergenceError, SinError
from .geometry import ManifoldPoint, as_tensor, distance, map_between
from .logging_config import get_logger, log_interval_step
from .model import (
    INITIAL_KAPPA,
    CoEvolvingGNN,
    CurvaturePair,
    EmbeddingTable,
    advance_interval,
)

logger = get_logger(__name__, {"component": "trainer"})

TRAIN_LOG_COLUMNS = [
    "epoch", "interval", "loss", "j_user", "j_item", "j_curv",
    "kappa_u", "kappa_i", "wall_time", "rss_mb"
]


# views and samples

class ViewPair(BaseModel):
    """The two temporal views of one interval, both at the interval's curvatures."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    alpha: EmbeddingTable
    beta: EmbeddingTable
    interval: int
    user_times: torch.Tensor
    item_times: torch.Tensor

    def table(self, view: str) -> EmbeddingTable:
        return self.alpha if view == "alpha" else self.beta


class SamplePlan(BaseModel):
    """
    Anchors of one side with their positives and negatives.

    Positives are the anchor itself in the other view plus the padded
    ``counterparts`` (masked by ``counterpart_mask``); negatives are
    same-side ids never equal to the anchor.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    side: str
    anchors: np.ndarray
    counterparts: np.ndarray
    counterpart_mask: np.ndarray
    negatives: np.ndarray

    @property
    def n_anchors(self) -> int:
        return int(self.anchors.shape[0])


def make_views(
    table_prev: EmbeddingTable,
    table_curr: EmbeddingTable,
    interval: int,
    first_interval: bool = False,
    fallback_time: float = 0.0
) -> ViewPair:
    """
    Alpha is the current forward output; beta the previous embeddings mapped
    to the current curvatures. On the first interval beta is alpha.
    """
    beta = table_curr if first_interval else advance_interval(table_prev, table_curr.kappas)
    return ViewPair(
        alpha=table_curr,
        beta=beta,
        interval=interval,
        user_times=table_curr.entity_times("user", fallback_time),
        item_times=table_curr.entity_times("item", fallback_time)
    )


def make_sample_plan(
    own: np.ndarray,
    other: np.ndarray,
    side: str,
    n_entities: int,
    negatives: int = 16,
    full_negatives: bool = False,
    rng: Optional[np.random.Generator] = None
) -> SamplePlan:
    """
    Sample plan of one side from the interval's (own, other) interaction pairs.

    Args:
        own: Entity ids of this side, one per event
        other: Counterpart ids, one per event
        side: "user" or "item"
        n_entities: Number of entities of this side
        negatives: Negatives per anchor, drawn uniformly with replacement
        full_negatives: Use every other entity of the side instead
        rng: Source of the negative draws
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    pairs = np.unique(np.stack([np.asarray(own, dtype=np.int64), np.asarray(other, dtype=np.int64)], axis=1), axis=0)
    anchors, starts, counts = np.unique(pairs[:, 0], return_index=True, return_counts=True)
    width = int(counts.max()) if counts.size else 0
    rows = np.repeat(np.arange(anchors.shape[0]), counts)
    cols = np.arange(pairs.shape[0]) - np.repeat(starts, counts)
    counterparts = np.zeros((anchors.shape[0], width), dtype=np.int64)
    mask = np.zeros((anchors.shape[0], width), dtype=np.float64)
    counterparts[rows, cols] = pairs[:, 1]
    mask[rows, cols] = 1.0

    if n_entities < 2:
        negative_ids = np.zeros((anchors.shape[0], 0), dtype=np.int64)
    elif full_negatives:
        base = np.arange(n_entities - 1)[None, :]
        negative_ids = base + (base >= anchors[:, None])
    else:
        draws = rng.integers(0, n_entities - 1, size=(anchors.shape[0], negatives))
        negative_ids = draws + (draws >= anchors[:, None])

    return SamplePlan(
        side=side,
        anchors=anchors,
        counterparts=counterparts,
        counterpart_mask=mask,
        negatives=negative_ids.astype(np.int64)
    )


def plan_interval(
    batch: IntervalBatch,
    n_users: int,
    n_items: int,
    negatives: int = 16,
    full_negatives: bool = False,
    rng: Optional[np.random.Generator] = None
) -> Tuple[SamplePlan, SamplePlan]:
    """User and item sample plans of one interval."""
    rng = rng if rng is not None else np.random.default_rng(0)
    user_plan = make_sample_plan(batch.users, batch.items, "user", n_users, negatives, full_negatives, rng)
    item_plan = make_sample_plan(batch.items, batch.users, "item", n_items, negatives, full_negatives, rng)
    return user_plan, item_plan


# similarity and weights

def similarity(
    x: Union[torch.Tensor, ManifoldPoint],
    y: Union[torch.Tensor, ManifoldPoint],
    tx: torch.Tensor,
    ty: torch.Tensor,
    kappa: Optional[float] = None,
    kappa_y: Optional[float] = None
) -> torch.Tensor:
    """
    Temporal similarity (tx^T ty) sigmoid(-d(x, y)).

    Raises:
        CurvatureMismatchError: x and y live in different spaces
    """
    if isinstance(x, ManifoldPoint):
        x, kappa = x.coords, x.kappa
    if isinstance(y, ManifoldPoint):
        y, kappa_y = y.coords, y.kappa
    if kappa_y is not None and not math.isclose(float(kappa), float(kappa_y), abs_tol=1e-12):
        raise CurvatureMismatchError(
            "Similarity of points in different spaces",
            details={"kappa_x": kappa, "kappa_y": kappa_y}
        )
    kernel = (as_tensor(tx) * as_tensor(ty)).sum(dim=-1)
    return kernel * torch.sigmoid(-distance(x, y, kappa))


def decay_similarity(
    x: torch.Tensor,
    y: torch.Tensor,
    tx: torch.Tensor,
    ty: torch.Tensor,
    tau: float,
    kappa: float
) -> torch.Tensor:
    """Similarity with the time kernel replaced by exp(-|tx - ty| / tau)."""
    kernel = torch.exp(-(as_tensor(tx) - as_tensor(ty)).abs() / tau)
    return kernel * torch.sigmoid(-distance(x, y, kappa))


def reweigh(
    similarities: torch.Tensor,
    eta: float,
    sign: str = "positive",
    mask: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """
    Hard-sample weights exp(-+eta s) / mean(exp(-+eta s)) along the last axis.

    Positives use the minus sign, negatives the plus sign, so the weights of
    each row sum to its (unmasked) count. ``eta = 0`` gives exact ones.
    """
    similarities = as_tensor(similarities)
    mask = torch.ones_like(similarities) if mask is None else as_tensor(mask)
    if eta == 0:
        return mask.clone()
    logits = (-eta if sign == "positive" else eta) * similarities
    logits = logits.masked_fill(mask <= 0, float("-inf"))
    count = mask.sum(dim=-1, keepdim=True)
    weights = torch.nan_to_num(torch.softmax(logits, dim=-1), nan=0.0)
    return weights * count


class _Terms(NamedTuple):
    pos: torch.Tensor
    pos_mask: torch.Tensor
    neg: torch.Tensor


REDUCTIONS = ("mean", "sum")


def _per_anchor(
    positive: torch.Tensor,
    pos_mask: torch.Tensor,
    negative: torch.Tensor,
    reduction: str
) -> torch.Tensor:
    """
    Per-anchor loss from log-sigmoid terms.

    ``mean`` takes the expectation over each anchor's positives and over
    its negatives, so both sides carry equal mass whatever K+ and K-.
    ``sum`` adds the terms as they are.
    """
    if reduction not in REDUCTIONS:
        raise SinError(
            f"Unknown contrast reduction: {reduction}",
            code="INVALID_REDUCTION",
            details={"reduction": reduction, "known": list(REDUCTIONS)}
        )
    pos_total = (positive * pos_mask).sum(dim=-1)
    neg_total = negative.sum(dim=-1)
    if reduction == "mean":
        pos_total = pos_total / pos_mask.sum(dim=-1).clamp_min(1.0)
        neg_total = neg_total / max(negative.shape[-1], 1)
    return -(pos_total + neg_total)


def _weighted_terms(terms: _Terms, eta: float, reduction: str = "mean") -> torch.Tensor:
    w_pos = reweigh(terms.pos, eta, "positive", terms.pos_mask)
    w_neg = reweigh(terms.neg, eta, "negative")
    logsig = PRIMITIVES["logsigmoid"]
    return _per_anchor(w_pos * logsig(terms.pos), terms.pos_mask, w_neg * logsig(-terms.neg), reduction)


def info_nce_loss(
    pos: torch.Tensor,
    neg: torch.Tensor,
    pos_mask: Optional[torch.Tensor] = None,
    reduction: str = "mean"
) -> torch.Tensor:
    """Unweighted binary cross-entropy contrast, averaged over anchors."""
    pos, neg = as_tensor(pos), as_tensor(neg)
    pos_mask = torch.ones_like(pos) if pos_mask is None else as_tensor(pos_mask)
    logsig = PRIMITIVES["logsigmoid"]
    return _per_anchor(logsig(pos), pos_mask, logsig(-neg), reduction).mean()


def contrast_terms(
    model: CoEvolvingGNN,
    views: ViewPair,
    plan: SamplePlan,
    anchor_view: str = "alpha",
    cocon: bool = True,
    kernel: bool = True,
    tau: float = 1.0
) -> _Terms:
    """Positive and negative similarities of every anchor of ``plan``."""
    anchor_table = views.table(anchor_view)
    sample_table = views.table("beta" if anchor_view == "alpha" else "alpha")
    if plan.side == "user":
        own_anchor, own_sample, other_sample = anchor_table.users, sample_table.users, sample_table.items
        kappa, kappa_other = anchor_table.kappa_u, anchor_table.kappa_i
        own_times, other_times = views.user_times, views.item_times
    else:
        own_anchor, own_sample, other_sample = anchor_table.items, sample_table.items, sample_table.users
        kappa, kappa_other = anchor_table.kappa_i, anchor_table.kappa_u
        own_times, other_times = views.item_times, views.user_times

    anchors = torch.as_tensor(plan.anchors, dtype=torch.long)
    negatives = torch.as_tensor(plan.negatives, dtype=torch.long)
    anchor_pts = own_anchor[anchors]
    anchor_t = own_times[anchors]

    pos_pts = own_sample[anchors][:, None, :]
    pos_t = anchor_t[:, None]
    pos_mask = torch.ones(anchors.shape[0], 1, dtype=DTYPE)
    if cocon and plan.counterparts.shape[1]:
        counterparts = torch.as_tensor(plan.counterparts, dtype=torch.long)
        images = map_between(other_sample[counterparts], kappa_other, kappa)
        pos_pts = torch.cat([pos_pts, images], dim=1)
        pos_t = torch.cat([pos_t, other_times[counterparts]], dim=1)
        pos_mask = torch.cat([pos_mask, as_tensor(plan.counterpart_mask)], dim=1)

    neg_pts = own_sample[negatives]
    neg_t = own_times[negatives]

    def score(points: torch.Tensor, times: torch.Tensor) -> torch.Tensor:
        if kernel:
            phi_a = model.time_encoding(anchor_t)[:, None, :]
            phi_s = model.time_encoding(times)
            return similarity(anchor_pts[:, None, :], points, phi_a, phi_s, kappa)
        return decay_similarity(anchor_pts[:, None, :], points, anchor_t[:, None], times, tau, kappa)

    return _Terms(pos=score(pos_pts, pos_t), pos_mask=pos_mask, neg=score(neg_pts, neg_t))


def co_contrast_loss(
    model: CoEvolvingGNN,
    views: ViewPair,
    plan: SamplePlan,
    eta: float = 2.0,
    anchor_view: str = "alpha",
    cocon: bool = True,
    kernel: bool = True,
    tau: float = 1.0,
    reduction: str = "mean"
) -> torch.Tensor:
    """Reweighed co-contrast loss of one side in one direction, averaged over anchors."""
    if plan.n_anchors == 0:
        return torch.zeros((), dtype=DTYPE)
    terms = contrast_terms(model, views, plan, anchor_view, cocon, kernel, tau)
    return _weighted_terms(terms, eta, reduction).mean()


@register_primitive()
def overall_loss(
    j_user: Tuple[torch.Tensor, torch.Tensor],
    j_item: Tuple[torch.Tensor, torch.Tensor],
    j_curv: Union[torch.Tensor, float],
    w1: float = 1.0,
    w2: float = 10.0
) -> torch.Tensor:
    """(J^U_ab + J^U_ba) + w1 (J^I_ab + J^I_ba) + w2 J_c."""
    return (j_user[0] + j_user[1]) + w1 * (j_item[0] + j_item[1]) + w2 * j_curv


# objective of one interval

class ObjectiveSettings(BaseModel):
    """Loss switches of one run."""
    eta: float = 2.0
    w1: float = 1.0
    w2: float = 10.0
    cocon: bool = True
    kernel: bool = True
    tau: float = 1.0
    fit_curvature: bool = True
    reduction: Literal["mean", "sum"] = "mean"

    @classmethod
    def from_config(cls, config: RunConfig, tau: float = 1.0) -> "ObjectiveSettings":
        return cls(
            eta=config.effective_eta,
            w1=config.w1,
            w2=config.w2,
            cocon=not config.no_cocon,
            kernel=not config.no_kernel,
            tau=tau,
            fit_curvature=config.curvature == "evolve",
            reduction=config.contrast_reduction
        )


class IntervalLoss(NamedTuple):
    total: torch.Tensor
    j_user: torch.Tensor
    j_item: torch.Tensor
    j_curv: torch.Tensor
    table: EmbeddingTable


def interval_objective(
    model: CoEvolvingGNN,
    batch: IntervalBatch,
    table_prev: EmbeddingTable,
    kappas: CurvaturePair,
    records: Optional[Tuple[CurvatureRecord, CurvatureRecord]],
    plans: Tuple[SamplePlan, SamplePlan],
    settings: ObjectiveSettings,
    first_interval: bool = False,
    tape: Optional[Tape] = None
) -> IntervalLoss:
    """
    Overall loss of one interval and the resulting alpha table.

    ``kappas`` are the interval's curvatures, held constant in the
    embeddings; the estimators receive gradient only through the
    curvature term.
    """
    apply: Callable[..., torch.Tensor] = tape.record if tape is not None else (
        lambda op, *args, **kwargs: (PRIMITIVES[op] if isinstance(op, str) else op)(*args, **kwargs)
    )

    hidden = advance_interval(table_prev, kappas)
    alpha = model.forward_interval(batch, hidden)
    views = make_views(table_prev, alpha, batch.index, first_interval, fallback_time=batch.t_start)

    user_plan, item_plan = plans
    options = dict(
        eta=settings.eta, cocon=settings.cocon, kernel=settings.kernel, tau=settings.tau, reduction=settings.reduction
    )
    j_user = (
        co_contrast_loss(model, views, user_plan, anchor_view="alpha", **options),
        co_contrast_loss(model, views, user_plan, anchor_view="beta", **options)
    )
    j_item = (
        co_contrast_loss(model, views, item_plan, anchor_view="alpha", **options),
        co_contrast_loss(model, views, item_plan, anchor_view="beta", **options)
    )

    j_curv = torch.zeros((), dtype=DTYPE)
    if settings.fit_curvature and records is not None:
        for side, record in zip(SIDES, records):
            if not record.observed:
                continue
            kappa_e = model.estimate_curvature(record.ricci_tensor(), side)
            j_curv = apply("add", j_curv, apply(curvature_loss, kappa_e, float(record.kappa_observed)))

    total = apply(overall_loss, j_user, j_item, j_curv, w1=settings.w1, w2=settings.w2)
    return IntervalLoss(total, j_user[0] + j_user[1], j_item[0] + j_item[1], j_curv, alpha)


# training loop

def clamp_kappa(value: float, bound: float) -> float:
    return float(np.clip(value, -bound, bound))


def interval_seed(seed: int, epoch: int, interval: int) -> np.random.Generator:
    return np.random.default_rng([seed, epoch, interval])


class TrainResult(BaseModel):
    """Trained model, final table and histories of one run."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: CoEvolvingGNN
    table: EmbeddingTable
    config: RunConfig
    log: List[Dict[str, float]] = Field(default_factory=list)
    epoch_losses: List[float] = Field(default_factory=list)
    curvature_history: List[CurvaturePair] = Field(default_factory=list)
    static_kappa: Optional[CurvaturePair] = None
    last_ricci: Dict[str, List[float]] = Field(default_factory=dict)
    train_events: int = 0
    train_intervals: int = 0
    d_user_features: int = 0
    d_item_features: int = 0
    user_ids: List[str] = Field(default_factory=list)
    item_ids: List[str] = Field(default_factory=list)


class Trainer:
    """
    Interval-by-interval optimisation of a CoEvolvingGNN.

    The embedding timeline restarts from the initial table every epoch and
    the parameters are updated once per interval with Adam.
    """

    def __init__(
        self,
        config: RunConfig,
        store: Optional[CurvatureStore] = None,
        run_id: Optional[str] = None
    ):
        self.config = config
        self.store = store if store is not None else CurvatureStore.from_config(config)
        self.run_id = run_id or str(uuid.uuid4())
        self.process = psutil.Process(os.getpid())
        self.logger = get_logger(__name__, {"component": "trainer"})

    def build_model(self, ds: Dataset) -> CoEvolvingGNN:
        config = self.config
        return CoEvolvingGNN(
            n_users=ds.n_users,
            n_items=ds.n_items,
            dim=config.dim,
            feature_dim=ds.feature_dim,
            ricci_width=config.ricci_width,
            encoder=config.encoder,
            fusion=config.fusion,
            layers=config.layers,
            dropout=config.dropout,
            attention=config.attention,
            seed=config.seed
        )

    def static_curvatures(self, ds: Dataset) -> CurvaturePair:
        """Observed curvature of each side over the whole training timeline."""
        whole = chunk_events(ds, ds.n_events)[0]
        values = []
        for side in SIDES:
            record = self.store.get(whole, side, interval="static")
            if not record.observed:
                self.logger.warning(f"Static {side} curvature unobservable; using 0")
            values.append(clamp_kappa(record.kappa_observed, self.config.kappa_bound))
        return CurvaturePair(kappa_u=values[0], kappa_i=values[1])

    def interval_kappas(
        self,
        model: CoEvolvingGNN,
        records: Tuple[CurvatureRecord, CurvatureRecord],
        static: Optional[CurvaturePair],
        interval: int
    ) -> CurvaturePair:
        mode = self.config.curvature
        if mode == "zero":
            return CurvaturePair(kappa_u=0.0, kappa_i=0.0, interval=interval)
        if mode == "static" and static is not None:
            return CurvaturePair(kappa_u=static.kappa_u, kappa_i=static.kappa_i, interval=interval)
        with torch.no_grad():
            values = [
                clamp_kappa(float(model.estimate_curvature(record.ricci_tensor(), side)), self.config.kappa_bound)
                for side, record in zip(SIDES, records)
            ]
        return CurvaturePair(kappa_u=values[0], kappa_i=values[1], interval=interval)

    def train(self, ds: Dataset, output_dir: Optional[Union[str, Path]] = None) -> TrainResult:
        """
        Train on the training split.

        Raises:
            DivergenceError: a non-finite loss
        """
        config = self.config
        torch.manual_seed(config.seed)
        batches = interval_partition(ds, config.intervals)
        model = self.build_model(ds)
        optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
        settings = ObjectiveSettings.from_config(config, tau=ds.mean_gap())
        log_path = Path(output_dir) / "train_log.csv" if output_dir is not None else None

        self.logger.info(
            f"Training on {ds.n_events} events in {len(batches)} intervals for {config.epochs} epochs",
            extra={"run_id": self.run_id, "component": "trainer"}
        )
        records = dict(zip(
            [(batch.index, side) for batch in batches for side in SIDES],
            self.store.warm(batches)
        ))
        static = self.static_curvatures(ds) if config.curvature == "static" else None

        def fresh_table() -> EmbeddingTable:
            return model.initial_table(ds.user_features, ds.item_features, INITIAL_KAPPA, config.seed)

        table = fresh_table()
        log: List[Dict[str, float]] = []
        epoch_losses: List[float] = []
        history: List[CurvaturePair] = []
        start = time.time()

        for epoch in range(config.epochs):
            model.train()
            table = fresh_table()
            history = []
            losses = []
            for position, batch in enumerate(batches):
                pair = (records[(batch.index, "user")], records[(batch.index, "item")])
                kappas = self.interval_kappas(model, pair, static, batch.index)
                plans = plan_interval(
                    batch, ds.n_users, ds.n_items, config.negatives, config.full_negatives,
                    interval_seed(config.seed, epoch, batch.index)
                )

                tape = Tape(model)
                result = interval_objective(
                    model, batch, table, kappas, pair, plans, settings,
                    first_interval=position == 0, tape=tape
                )
                loss = float(result.total.detach())
                if not math.isfinite(loss):
                    raise DivergenceError(
                        f"Non-finite loss at epoch {epoch}, interval {batch.index}",
                        details={
                            "epoch": epoch,
                            "interval": batch.index,
                            "j_user": float(result.j_user.detach()),
                            "j_item": float(result.j_item.detach()),
                            "j_curv": float(result.j_curv.detach())
                        }
                    )
                grads = backward(tape, result.total)
                optimizer.zero_grad()
                grads.apply_to(tape.params)
                optimizer.step()

                table = result.table.detach()
                history.append(kappas)
                losses.append(loss)
                row = {
                    "epoch": epoch,
                    "interval": batch.index,
                    "loss": loss,
                    "j_user": float(result.j_user.detach()),
                    "j_item": float(result.j_item.detach()),
                    "j_curv": float(result.j_curv.detach()),
                    "kappa_u": kappas.kappa_u,
                    "kappa_i": kappas.kappa_i,
                    "wall_time": time.time() - start,
                    "rss_mb": self.process.memory_info().rss / (1024 * 1024)
                }
                log.append(row)
                log_interval_step(self.logger, epoch, batch.index, loss, kappas.kappa_u, kappas.kappa_i, self.run_id)

            epoch_losses.append(float(np.mean(losses)) if losses else 0.0)
            self.logger.info(
                f"Epoch {epoch} mean loss {epoch_losses[-1]:.6f}",
                extra={"run_id": self.run_id, "epoch": epoch, "loss": epoch_losses[-1]}
            )
            if log_path is not None:
                write_train_log(log, log_path)

        if log_path is not None and not log:
            write_train_log(log, log_path)

        last = batches[-1] if batches else None
        last_ricci = {}
        if last is not None:
            last_ricci = {side: records[(last.index, side)].ricci for side in SIDES}

        return TrainResult(
            model=model,
            table=table.detach(),
            config=config,
            log=log,
            epoch_losses=epoch_losses,
            curvature_history=history,
            static_kappa=static,
            last_ricci=last_ricci,
            train_events=ds.n_events,
            train_intervals=len(batches),
            d_user_features=0 if ds.user_features is None else int(ds.user_features.shape[1]),
            d_item_features=0 if ds.item_features is None else int(ds.item_features.shape[1]),
            user_ids=[str(label) for label in ds.user_ids],
            item_ids=[str(label) for label in ds.item_ids]
        )


def write_train_log(log: Sequence[Dict[str, float]], path: Union[str, Path]) -> Path:
    """Training log as CSV, one row per (epoch, interval)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(list(log), columns=TRAIN_LOG_COLUMNS).to_csv(path, index=False, lineterminator="\n")
    return path


def train(
    ds: Dataset,
    config: RunConfig,
    output_dir: Optional[Union[str, Path]] = None,
    store: Optional[CurvatureStore] = None,
    run_id: Optional[str] = None
) -> TrainResult:
    """Train a model and, with an output directory, write its checkpoint and log."""
    if store is None:
        cache_dir = Path(output_dir) / "curvature" if output_dir is not None else None
        store = CurvatureStore.from_config(config, directory=cache_dir)
    result = Trainer(config, store, run_id).train(ds, output_dir)
    if output_dir is not None:
        save_checkpoint(Path(output_dir) / "checkpoint.json", result)
    return result
