"""
Graph curvature engine.

Co-occurrence subgraphs of one entity side, Ollivier-Ricci edge curvature by
exact optimal transport over hop distances, and the sampled triangle
estimate of sectional curvature on graphs and on manifold point sets.
"""

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from itertools import combinations
from typing import Any, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import ot
import pandas as pd
import torch
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .diffengine import register_primitive
from .errors import (
    DisconnectedSupportError,
    DomainError,
    GraphTooSmallError,
    NonEdgeError,
    SinError,
)
from .geometry import as_tensor, distance, geodesic_midpoint
from .logging_config import get_logger

logger = get_logger(__name__, {"component": "curvature"})

SIDES = ("user", "item")
DEFAULT_ALPHA = 0.5
DEFAULT_WIDTH = 64


class SimpleGraph(nx.Graph):
    """Undirected graph without self-loops or parallel edges."""

    def add_edge(self, u_of_edge: Hashable, v_of_edge: Hashable, **attr: Any) -> None:
        if u_of_edge == v_of_edge:
            raise SinError(
                f"Self-loop on node {u_of_edge!r} is not allowed",
                code="SELF_LOOP",
                details={"node": repr(u_of_edge)}
            )
        super().add_edge(u_of_edge, v_of_edge, **attr)

    def add_edges_from(self, ebunch_to_add: Iterable, **attr: Any) -> None:
        for edge in ebunch_to_add:
            u, v = edge[0], edge[1]
            data = dict(edge[2]) if len(edge) > 2 else {}
            data.update(attr)
            self.add_edge(u, v, **data)

    def sorted_neighbors(self, x: Hashable) -> List[Hashable]:
        return sorted(self.neighbors(x))

    def sorted_edges(self) -> List[Tuple[Hashable, Hashable]]:
        return sorted(tuple(sorted(edge)) for edge in self.edges())


class MassDistribution(BaseModel):
    """Probability mass over a finite node support."""
    support: List[Any]
    mass: List[float]

    @field_validator("mass")
    @classmethod
    def _check_mass(cls, mass: List[float]) -> List[float]:
        if any(m < 0 for m in mass):
            raise ValueError("masses must be non-negative")
        if abs(sum(mass) - 1.0) > 1e-12:
            raise ValueError(f"masses sum to {sum(mass)}, not 1")
        return mass

    def as_dict(self) -> Dict[Any, float]:
        return dict(zip(self.support, self.mass))


class RicciVector(BaseModel):
    """Edge curvatures of one interval, padded or subsampled to a fixed width."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: List[float]
    n_edges: int = Field(description="Leading entries holding real edge curvatures")
    interval: Optional[int] = None

    def as_tensor(self) -> torch.Tensor:
        return as_tensor(self.values)


def build_cooccurrence_subgraph(
    users: Sequence[int],
    items: Sequence[int],
    side: str,
    K: int = 1,
    sample_ratio: float = 1.0,
    seed: int = 0
) -> SimpleGraph:
    """
    Link two same-side entities sharing at least K distinct counterparts.

    Args:
        users: Event user ids
        items: Event item ids, aligned with ``users``
        side: "user" or "item", the entity type forming the nodes
        K: Minimum number of shared counterparts per edge
        sample_ratio: Fraction of active entities kept as nodes
        seed: Seed of the entity sample

    Returns:
        The co-occurrence graph; empty for an empty interval
    """
    if side not in SIDES:
        raise SinError(f"Unknown side: {side}", code="INVALID_SIDE", details={"side": side})
    if K < 1:
        raise DomainError("K must be at least 1", details={"K": K})
    if not 0 < sample_ratio <= 1:
        raise DomainError("sample_ratio must lie in (0, 1]", details={"sample_ratio": sample_ratio})

    frame = pd.DataFrame({"user": np.asarray(users, dtype=np.int64), "item": np.asarray(items, dtype=np.int64)})
    node_col, other_col = ("user", "item") if side == "user" else ("item", "user")
    graph = SimpleGraph()
    if frame.empty:
        return graph

    entities = np.unique(frame[node_col].to_numpy())
    n_sample = min(len(entities), max(1, math.ceil(sample_ratio * len(entities))))
    if n_sample < len(entities):
        rng = np.random.default_rng(seed)
        entities = np.sort(rng.choice(entities, size=n_sample, replace=False))
    graph.add_nodes_from(int(e) for e in entities)

    pairs = frame[frame[node_col].isin(entities)].drop_duplicates()
    shared: Counter = Counter()
    for _, group in pairs.groupby(other_col)[node_col]:
        members = sorted(int(e) for e in group.to_numpy())
        shared.update(combinations(members, 2))

    graph.add_edges_from(pair for pair, count in sorted(shared.items()) if count >= K)
    return graph


def mass_distribution(g: SimpleGraph, x: Hashable, alpha: float = DEFAULT_ALPHA) -> MassDistribution:
    """Lazy random-walk mass: alpha at x, the rest spread over its neighbours."""
    if not 0 <= alpha <= 1:
        raise DomainError("alpha must lie in [0, 1]", details={"alpha": alpha})
    neighbors = g.sorted_neighbors(x)
    if not neighbors:
        return MassDistribution(support=[x], mass=[1.0])
    share = (1 - alpha) / len(neighbors)
    return MassDistribution(support=[x] + neighbors, mass=[alpha] + [share] * len(neighbors))


def _hop_costs(g: SimpleGraph, sources: Sequence[Hashable], targets: Sequence[Hashable]) -> np.ndarray:
    costs = np.zeros((len(sources), len(targets)))
    for i, source in enumerate(sources):
        lengths = nx.single_source_shortest_path_length(g, source)
        for j, target in enumerate(targets):
            if target not in lengths:
                raise DisconnectedSupportError(
                    f"No path between {source!r} and {target!r}",
                    details={"source": repr(source), "target": repr(target)}
                )
            costs[i, j] = lengths[target]
    return costs


def wasserstein(g: SimpleGraph, mu: MassDistribution, nu: MassDistribution) -> float:
    """Exact 1-Wasserstein distance under the hop metric."""
    costs = _hop_costs(g, mu.support, nu.support)
    return float(ot.emd2(
        np.asarray(mu.mass, dtype=np.float64),
        np.asarray(nu.mass, dtype=np.float64),
        costs
    ))


def ollivier_ricci_edge(g: SimpleGraph, x: Hashable, y: Hashable, alpha: float = DEFAULT_ALPHA) -> float:
    """1 - W(m_x, m_y) for an edge of unit hop length."""
    if not g.has_edge(x, y):
        raise NonEdgeError(f"({x!r}, {y!r}) is not an edge", details={"x": repr(x), "y": repr(y)})
    return 1.0 - wasserstein(g, mass_distribution(g, x, alpha), mass_distribution(g, y, alpha))


def fit_width(values: Sequence[float], width: int, seed: int = 0) -> Tuple[List[float], int]:
    """Zero-pad, or uniformly subsample in order, to exactly ``width`` entries."""
    values = list(values)
    if len(values) > width:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(values), size=width, replace=False))
        return [values[i] for i in keep], width
    return values + [0.0] * (width - len(values)), len(values)


def ricci_vector(
    g: SimpleGraph,
    alpha: float = DEFAULT_ALPHA,
    max_edges: int = 256,
    seed: int = 0,
    width: int = DEFAULT_WIDTH,
    interval: Optional[int] = None,
    workers: int = 1
) -> RicciVector:
    """
    Ollivier-Ricci curvatures of up to ``max_edges`` uniformly sampled edges.

    Edge order is the sorted edge list, so the vector is deterministic given
    the seed. An edgeless graph gives the zero vector.
    """
    if max_edges < 1:
        raise DomainError("max_edges must be at least 1", details={"max_edges": max_edges})
    edges = g.sorted_edges()
    if len(edges) > max_edges:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(edges), size=max_edges, replace=False))
        edges = [edges[i] for i in keep]

    def _edge(edge: Tuple[Hashable, Hashable]) -> float:
        return ollivier_ricci_edge(g, edge[0], edge[1], alpha)

    if workers > 1 and len(edges) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            curvatures = list(pool.map(_edge, edges))
    else:
        curvatures = [_edge(edge) for edge in edges]

    values, n_edges = fit_width(curvatures, width, seed)
    return RicciVector(values=values, n_edges=n_edges, interval=interval)


def triangle_deviation(dam: float, dbc: float, dab: float, dac: float) -> Tuple[float, Optional[float]]:
    """
    Parallelogram-law deviation of the triangle abc with m the midpoint of bc.

    Returns:
        (gamma, gamma / (2 d(a, m))); the normalised value is None when d(a, m) = 0
    """
    gamma = dam ** 2 + dbc ** 2 / 4 - (dab ** 2 + dac ** 2) / 2
    if dam <= 0:
        return gamma, None
    return gamma, gamma / (2 * dam)


def _graph_observed_curvature(g: SimpleGraph, iterations: int, rng: np.random.Generator) -> float:
    nodes = sorted(g.nodes())
    if len(nodes) < 3:
        raise GraphTooSmallError(
            "Observed curvature needs at least 3 nodes",
            details={"n_nodes": len(nodes)}
        )
    lengths: Dict[Hashable, Dict[Hashable, int]] = {}

    def hops(source: Hashable) -> Dict[Hashable, int]:
        if source not in lengths:
            lengths[source] = nx.single_source_shortest_path_length(g, source)
        return lengths[source]

    per_center: List[float] = []
    for m in nodes:
        neighbors = g.sorted_neighbors(m)
        if len(neighbors) < 2:
            continue
        others = [node for node in nodes if node != m]
        samples: List[float] = []
        for _ in range(iterations):
            b_idx, c_idx = rng.choice(len(neighbors), size=2, replace=False)
            b, c = neighbors[b_idx], neighbors[c_idx]
            a = others[rng.integers(len(others))]
            from_a = hops(a)
            if m not in from_a:
                continue
            _, normalized = triangle_deviation(
                float(from_a[m]),
                float(hops(b)[c]),
                float(from_a[b]),
                float(from_a[c])
            )
            if normalized is not None:
                samples.append(normalized)
        if samples:
            per_center.append(float(np.mean(samples)))

    if not per_center:
        raise GraphTooSmallError(
            "No node with two neighbours and a reachable third point",
            details={"n_nodes": len(nodes), "n_edges": g.number_of_edges()}
        )
    return float(np.mean(per_center))


def _point_observed_curvature(
    coords: torch.Tensor,
    kappa: float,
    iterations: int,
    rng: np.random.Generator,
    n_neighbors: int = 8
) -> float:
    n = coords.shape[0]
    if n < 3:
        raise GraphTooSmallError("Observed curvature needs at least 3 points", details={"n_points": n})
    pairwise = distance(coords[:, None, :], coords[None, :, :], kappa).detach().numpy()
    k_near = min(n_neighbors, n - 1)

    per_center: List[float] = []
    for p in range(n):
        order = [j for j in np.argsort(pairwise[p], kind="stable") if j != p][:k_near]
        if len(order) < 2:
            continue
        samples: List[float] = []
        for _ in range(iterations):
            b, c = rng.choice(order, size=2, replace=False)
            candidates = [j for j in range(n) if j != b and j != c]
            a = candidates[rng.integers(len(candidates))]
            m = geodesic_midpoint(coords[b], coords[c], kappa)
            dam = float(distance(coords[a], m, kappa))
            _, normalized = triangle_deviation(dam, pairwise[b, c], pairwise[a, b], pairwise[a, c])
            if normalized is not None:
                samples.append(normalized)
        if samples:
            per_center.append(float(np.mean(samples)))

    if not per_center:
        raise GraphTooSmallError("No usable triangles in the point set", details={"n_points": n})
    return float(np.mean(per_center))


def observed_curvature(
    g_or_points: Union[SimpleGraph, torch.Tensor, np.ndarray],
    iterations: int = 10,
    seed: int = 0,
    kappa: Optional[float] = None
) -> float:
    """
    Sampled sectional curvature from triangle deviations.

    Graph mode treats each node with at least two neighbours as the midpoint
    of two sampled neighbours and measures hop distances. Point mode takes an
    (n, d) coordinate array at curvature ``kappa`` and uses true geodesic
    midpoints of nearby pairs.

    Raises:
        GraphTooSmallError: fewer than 3 nodes or no usable centre
    """
    if iterations < 1:
        raise DomainError("iterations must be at least 1", details={"iterations": iterations})
    rng = np.random.default_rng(seed)
    if isinstance(g_or_points, nx.Graph):
        return _graph_observed_curvature(g_or_points, iterations, rng)
    if kappa is None:
        raise DomainError("Point mode needs the curvature of the coordinates")
    return _point_observed_curvature(as_tensor(g_or_points), float(kappa), iterations, rng)


@register_primitive()
def curvature_loss(kappa_e: Any, kappa_o: Any) -> Any:
    """Squared error between estimated and observed curvature."""
    return (kappa_e - kappa_o) ** 2
