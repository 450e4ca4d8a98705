"""
Co-evolving graph network over a user space and an item space.

Each interval batch integrates its interactions into tangent vectors,
aggregates every active user and item from its own hidden state, its
interactions and the gyromidpoint of its counterparts mapped across
spaces, and carries inactive entities unchanged. A curvature estimator per
side maps the interval's Ricci vector to the curvature of the next space.
"""

import math
from collections import OrderedDict
from typing import Any, Callable, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
from pydantic import BaseModel

from .diffengine import DTYPE, register_primitive
from .errors import DimensionMismatchError, SinError
from .geometry import (
    as_tensor,
    distance,
    exp_map0,
    log_map0,
    map_between,
    mobius_add,
    mobius_matvec,
    weighted_midpoints,
)

INITIAL_KAPPA = -1.0


class CurvaturePair(BaseModel):
    """Curvatures of the user and item spaces for one interval."""
    kappa_u: float
    kappa_i: float
    interval: int = -1


class EmbeddingTable:
    """
    Current user and item points with their curvatures.

    The points of the previous interval, transported to the current
    curvatures, are the hidden states of the next aggregation.
    """

    def __init__(
        self,
        users: torch.Tensor,
        items: torch.Tensor,
        kappa_u: float,
        kappa_i: float,
        last_t_user: Optional[np.ndarray] = None,
        last_t_item: Optional[np.ndarray] = None
    ):
        self.users = users
        self.items = items
        self.kappa_u = float(kappa_u)
        self.kappa_i = float(kappa_i)
        self.last_t_user = np.full(users.shape[0], np.nan) if last_t_user is None else last_t_user
        self.last_t_item = np.full(items.shape[0], np.nan) if last_t_item is None else last_t_item

    @property
    def kappas(self) -> CurvaturePair:
        return CurvaturePair(kappa_u=self.kappa_u, kappa_i=self.kappa_i)

    def detach(self) -> "EmbeddingTable":
        return EmbeddingTable(
            self.users.detach(), self.items.detach(), self.kappa_u, self.kappa_i,
            self.last_t_user.copy(), self.last_t_item.copy()
        )

    def clone(self) -> "EmbeddingTable":
        return EmbeddingTable(
            self.users.detach().clone(), self.items.detach().clone(), self.kappa_u, self.kappa_i,
            self.last_t_user.copy(), self.last_t_item.copy()
        )

    def entity_times(self, side: str, fallback: float) -> torch.Tensor:
        """Last interaction time per entity, ``fallback`` where none exists."""
        times = self.last_t_user if side == "user" else self.last_t_item
        return as_tensor(np.where(np.isnan(times), fallback, times))


# building blocks

@register_primitive()
def time_encode(
    t: torch.Tensor,
    omega: torch.Tensor,
    theta: torch.Tensor,
    mode: str = "cosine"
) -> torch.Tensor:
    """
    Harmonic time encoding of shape (..., d).

    Cosine mode emits sqrt(1/d) cos(omega t + theta) with d = len(omega).
    Fourier mode emits sqrt(2/d) [cos, sin] pairs with d = 2 len(omega), so
    the kernel phi(t1)^T phi(t2) depends only on t1 - t2.
    """
    phase = as_tensor(t)[..., None] * omega + theta
    if mode == "cosine":
        return math.sqrt(1.0 / omega.shape[-1]) * torch.cos(phase)
    if mode == "fourier":
        d = 2 * omega.shape[-1]
        return math.sqrt(2.0 / d) * torch.cat([torch.cos(phase), torch.sin(phase)], dim=-1)
    raise SinError(f"Unknown encoder mode: {mode}", code="INVALID_ENCODER", details={"mode": mode})


def integrate_interaction(
    features: torch.Tensor,
    t: torch.Tensor,
    w7: torch.Tensor,
    omega: torch.Tensor,
    theta: torch.Tensor,
    mode: str = "cosine",
    activation: Optional[Callable[[torch.Tensor], torch.Tensor]] = torch.tanh
) -> torch.Tensor:
    """
    Tangent-space embedding of interactions, activation(W7 [X : phi(t)]).

    Passing ``activation=None`` gives the linear form.
    """
    phi = time_encode(t, omega, theta, mode)
    features = as_tensor(features).reshape(phi.shape[0], -1)
    joined = torch.cat([features, phi], dim=-1)
    if joined.shape[-1] != w7.shape[-1]:
        raise DimensionMismatchError(
            f"Interaction input width {joined.shape[-1]} does not match W7 width {w7.shape[-1]}",
            details={"feature_dim": features.shape[-1], "time_dim": phi.shape[-1], "w7_shape": list(w7.shape)}
        )
    out = joined @ w7.transpose(0, 1)
    return out if activation is None else activation(out)


def aggregate_interactions(
    e: torch.Tensor,
    index: torch.Tensor,
    n_entities: int,
    mode: str,
    mlp: Callable[[torch.Tensor], torch.Tensor]
) -> torch.Tensor:
    """
    Per-entity pooled interaction embedding.

    Late fusion is Pooling(MLP(e)), early fusion MLP(Pooling(e)); pooling is
    the mean. Entities without events get the zero vector.
    """
    counts = torch.zeros(n_entities, dtype=DTYPE).index_add(0, index, torch.ones(index.shape[0], dtype=DTYPE))
    present = (counts > 0).to(DTYPE)[:, None]

    def pool(values: torch.Tensor) -> torch.Tensor:
        sums = torch.zeros(n_entities, values.shape[-1], dtype=DTYPE).index_add(0, index, values)
        return sums / counts.clamp_min(1.0)[:, None]

    if mode == "late":
        return pool(mlp(e)) * present
    if mode == "early":
        return mlp(pool(e)) * present
    raise SinError(f"Unknown fusion mode: {mode}", code="INVALID_FUSION", details={"mode": mode})


class CurvatureEstimator(nn.Module):
    """kappa_e = MLP(r)^T W8 MLP(r); the sign is unconstrained."""

    def __init__(self, width: int = 64):
        super().__init__()
        self.width = width
        self.mlp: nn.Module = nn.Sequential(
            nn.Linear(width, width),
            nn.Tanh(),
            nn.Linear(width, width),
            nn.Tanh()
        )
        self.w8 = nn.Parameter(torch.randn(width, width) / width)

    def forward(self, r: torch.Tensor) -> torch.Tensor:
        if r.shape[-1] != self.width:
            raise DimensionMismatchError(
                f"Ricci vector width {r.shape[-1]} does not match estimator width {self.width}",
                details={"ricci_width": r.shape[-1], "estimator_width": self.width}
            )
        h = self.mlp(r)
        return (h @ self.w8 * h).sum(dim=-1)


class CoEvolvingGNN(nn.Module):
    """
    Parameters and forward pass of the co-evolving network.

    Aggregation matrices m1..m6, interaction matrix w7, time encoder
    (omega, theta), the fusion perceptron and one curvature estimator per
    side.
    """

    def __init__(
        self,
        n_users: int,
        n_items: int,
        dim: int = 64,
        feature_dim: int = 0,
        ricci_width: int = 64,
        encoder: str = "cosine",
        fusion: str = "late",
        layers: int = 1,
        dropout: float = 0.3,
        attention: bool = False,
        seed: int = 0
    ):
        super().__init__()
        if encoder == "fourier" and dim % 2:
            raise DimensionMismatchError("fourier encoder needs an even dim", details={"dim": dim})
        self.n_users = n_users
        self.n_items = n_items
        self.dim = dim
        self.feature_dim = feature_dim
        self.ricci_width = ricci_width
        self.encoder = encoder
        self.fusion = fusion
        self.layers = layers
        self.attention = attention

        n_freq = dim // 2 if encoder == "fourier" else dim
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            for name in ("m1", "m2", "m3", "m4", "m5", "m6"):
                setattr(self, name, nn.Parameter(0.5 * torch.eye(dim) + 0.01 * torch.randn(dim, dim)))
            self.w7 = nn.Parameter(torch.randn(dim, feature_dim + dim) / math.sqrt(feature_dim + dim))
            self.omega = nn.Parameter(torch.from_numpy(1.0 / 10 ** np.linspace(0, 9, n_freq)).float())
            self.theta = nn.Parameter(torch.zeros(n_freq))
            self.fusion_layer = nn.Linear(dim, dim)
            self.user_curvnn = CurvatureEstimator(ricci_width)
            self.item_curvnn = CurvatureEstimator(ricci_width)
        self.dropout = nn.Dropout(dropout)
        self.double()

    # encoders

    def time_encoding(self, t: Union[torch.Tensor, np.ndarray, float]) -> torch.Tensor:
        return time_encode(as_tensor(t), self.omega, self.theta, self.encoder)

    def fusion_mlp(self, x: torch.Tensor) -> torch.Tensor:
        return torch.tanh(self.fusion_layer(x))

    def interaction_embeddings(self, features: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        return integrate_interaction(features, t, self.w7, self.omega, self.theta, self.encoder)

    def estimate_curvature(self, r: torch.Tensor, side: str) -> torch.Tensor:
        estimator = self.user_curvnn if side == "user" else self.item_curvnn
        return estimator(as_tensor(r))

    # aggregation

    def _midpoint_weights(
        self,
        adjacency: torch.Tensor,
        hidden: torch.Tensor,
        kappa_self: float,
        counterparts: torch.Tensor,
        kappa_other: float
    ) -> torch.Tensor:
        if not self.attention:
            return adjacency
        query = log_map0(hidden, kappa_self)
        keys = log_map0(counterparts, kappa_other)
        scores = query @ keys.transpose(0, 1) / math.sqrt(self.dim)
        scores = scores.masked_fill(adjacency <= 0, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        return torch.nan_to_num(weights, nan=0.0)

    def _aggregate(
        self,
        active: torch.Tensor,
        adjacency: torch.Tensor,
        pooled: torch.Tensor,
        own: torch.Tensor,
        other: torch.Tensor,
        kappa_own: float,
        kappa_other: float,
        matrices: Tuple[torch.Tensor, torch.Tensor, torch.Tensor]
    ) -> torch.Tensor:
        m_hidden, m_interaction, m_counterpart = matrices
        hidden = own[active]
        weights = self._midpoint_weights(adjacency, hidden, kappa_own, other, kappa_other)
        midpoint = weighted_midpoints(weights, other, kappa_other)

        hidden_term = mobius_matvec(m_hidden, hidden, kappa_own)
        interaction_term = mobius_matvec(m_interaction, exp_map0(pooled, kappa_own), kappa_own)
        counterpart_term = mobius_matvec(m_counterpart, map_between(midpoint, kappa_other, kappa_own), kappa_own)
        # left to right: (hidden (+) interaction) (+) counterpart
        updated = mobius_add(mobius_add(hidden_term, interaction_term, kappa_own), counterpart_term, kappa_own)
        return own.index_copy(0, active, updated)

    def aggregate_users(
        self,
        active: torch.Tensor,
        adjacency: torch.Tensor,
        pooled: torch.Tensor,
        users: torch.Tensor,
        items: torch.Tensor,
        kappa_u: float,
        kappa_i: float
    ) -> torch.Tensor:
        """Updated user table; ``adjacency`` is (active users, n_items)."""
        return self._aggregate(active, adjacency, pooled, users, items, kappa_u, kappa_i, (self.m1, self.m2, self.m3))

    def aggregate_items(
        self,
        active: torch.Tensor,
        adjacency: torch.Tensor,
        pooled: torch.Tensor,
        users: torch.Tensor,
        items: torch.Tensor,
        kappa_u: float,
        kappa_i: float
    ) -> torch.Tensor:
        """Updated item table; ``adjacency`` is (active items, n_users)."""
        return self._aggregate(active, adjacency, pooled, items, users, kappa_i, kappa_u, (self.m4, self.m5, self.m6))

    def forward_interval(self, batch: Any, table: EmbeddingTable, layers: Optional[int] = None) -> EmbeddingTable:
        """
        One interval of the network on a table already at the interval's curvatures.

        Args:
            batch: IntervalBatch of the interval
            table: Hidden states, i.e. the previous table transported to the current curvatures
            layers: Override of the stacked layer count

        Returns:
            The new table at the same curvatures
        """
        users = torch.as_tensor(np.asarray(batch.users), dtype=torch.long)
        items = torch.as_tensor(np.asarray(batch.items), dtype=torch.long)
        t = as_tensor(np.asarray(batch.timestamps))
        if users.shape[0] == 0:
            return table

        e = self.dropout(self.interaction_embeddings(as_tensor(np.asarray(batch.features)), t))
        pooled_users = aggregate_interactions(e, users, self.n_users, self.fusion, self.fusion_mlp)
        pooled_items = aggregate_interactions(e, items, self.n_items, self.fusion, self.fusion_mlp)

        active_u, row_u = torch.unique(users, return_inverse=True)
        active_i, row_i = torch.unique(items, return_inverse=True)
        adj_ui = torch.zeros(active_u.shape[0], self.n_items, dtype=DTYPE)
        adj_ui[row_u, items] = 1.0
        adj_iu = torch.zeros(active_i.shape[0], self.n_users, dtype=DTYPE)
        adj_iu[row_i, users] = 1.0

        kappa_u, kappa_i = table.kappa_u, table.kappa_i
        cur_u, cur_i = table.users, table.items
        for _ in range(self.layers if layers is None else layers):
            new_u = self.aggregate_users(active_u, adj_ui, pooled_users[active_u], cur_u, cur_i, kappa_u, kappa_i)
            new_i = self.aggregate_items(active_i, adj_iu, pooled_items[active_i], cur_u, cur_i, kappa_u, kappa_i)
            cur_u, cur_i = new_u, new_i

        last_u, last_i = table.last_t_user.copy(), table.last_t_item.copy()
        np.fmax.at(last_u, users.numpy(), np.asarray(batch.timestamps, dtype=np.float64))
        np.fmax.at(last_i, items.numpy(), np.asarray(batch.timestamps, dtype=np.float64))
        return EmbeddingTable(cur_u, cur_i, kappa_u, kappa_i, last_u, last_i)

    def parameter_set(self) -> "OrderedDict[str, nn.Parameter]":
        return OrderedDict(self.named_parameters())

    def initial_table(
        self,
        user_features: Optional[np.ndarray] = None,
        item_features: Optional[np.ndarray] = None,
        kappa: float = INITIAL_KAPPA,
        seed: int = 0
    ) -> EmbeddingTable:
        """
        Starting points: raw features (padded or truncated to dim) or a small
        random normal, exp-mapped into the initial space.
        """
        generator = torch.Generator().manual_seed(seed)

        def init(features: Optional[np.ndarray], n: int) -> torch.Tensor:
            if features is not None and np.asarray(features).size and np.asarray(features).shape[1] > 0:
                raw = as_tensor(np.asarray(features, dtype=np.float64))[:, :self.dim]
                x = torch.nn.functional.pad(raw, (0, self.dim - raw.shape[1]))
            else:
                x = 0.1 * torch.randn(n, self.dim, generator=generator, dtype=DTYPE)
            return exp_map0(x, kappa)

        return EmbeddingTable(init(user_features, self.n_users), init(item_features, self.n_items), kappa, kappa)


# module-level operations

def aggregate_user(model: CoEvolvingGNN, batch: Any, table: EmbeddingTable) -> torch.Tensor:
    """User table after one aggregation layer."""
    return model.forward_interval(batch, table, layers=1).users


def aggregate_item(model: CoEvolvingGNN, batch: Any, table: EmbeddingTable) -> torch.Tensor:
    """Item table after one aggregation layer."""
    return model.forward_interval(batch, table, layers=1).items


def stack_layers(model: CoEvolvingGNN, batch: Any, table: EmbeddingTable, layers: int) -> EmbeddingTable:
    """Apply ``layers`` simultaneous user/item aggregations within one interval."""
    if layers < 1:
        raise SinError("layers must be at least 1", code="INVALID_LAYERS", details={"layers": layers})
    return model.forward_interval(batch, table, layers=layers)


def estimate_curvature(estimator: CurvatureEstimator, r: torch.Tensor) -> torch.Tensor:
    return estimator(as_tensor(r))


def advance_interval(table: EmbeddingTable, new: Union[CurvaturePair, Tuple[float, float]]) -> EmbeddingTable:
    """Transport every point to the next interval's curvatures."""
    kappa_u, kappa_i = (new.kappa_u, new.kappa_i) if isinstance(new, CurvaturePair) else new
    return EmbeddingTable(
        map_between(table.users, table.kappa_u, kappa_u),
        map_between(table.items, table.kappa_i, kappa_i),
        kappa_u,
        kappa_i,
        table.last_t_user.copy(),
        table.last_t_item.copy()
    )


def score_matrix(
    model: CoEvolvingGNN,
    table: EmbeddingTable,
    users: Union[torch.Tensor, np.ndarray],
    t: Union[torch.Tensor, np.ndarray],
    decay: bool = False
) -> torch.Tensor:
    """
    Scores of every item for each (user, t) query, shape (queries, n_items).

    score(u, i) = (phi(t)^T phi(t)) sigmoid(-d(image of u, i)) with both
    encodings at the query time; the decay kernel exp(-|t - t|/tau) is 1.
    """
    users = torch.as_tensor(np.asarray(users), dtype=torch.long)
    images = map_between(table.users[users], table.kappa_u, table.kappa_i)
    dist = distance(images[:, None, :], table.items[None, :, :], table.kappa_i)
    if decay:
        kernel = torch.ones(users.shape[0], dtype=DTYPE)
    else:
        phi = model.time_encoding(as_tensor(np.asarray(t)))
        kernel = (phi * phi).sum(dim=-1)
    return kernel[:, None] * torch.sigmoid(-dist)


def predict_scores(
    model: CoEvolvingGNN,
    table: EmbeddingTable,
    user: int,
    t: float,
    decay: bool = False
) -> torch.Tensor:
    """Scores of all items for one user at time t; higher is more likely."""
    return score_matrix(model, table, np.array([user]), np.array([t], dtype=np.float64), decay)[0]
