"""
Sample interaction data for testing.
"""

import math
from pathlib import Path

import networkx as nx
import numpy as np
import torch

from sin_coevolve.config import RunConfig
from sin_coevolve.curvature import SimpleGraph
from sin_coevolve.data import Dataset, synth_generate

SAMPLE_EVENT_LOG = """user_id,item_id,timestamp,state_label,f1,f2
u1,i1,0.0,0,0.1,0.2
u2,i1,1.0,0,0.3,0.4
u1,i2,2.0,0,0.5,0.6
u3,i3,3.0,0,0.7,0.8
u2,i2,4.0,0,0.9,1.0
u3,i1,5.0,0,1.1,1.2
"""

UNSORTED_EVENT_LOG = """user_id,item_id,timestamp,state_label
1,10,5.0,0
2,10,1.0,0
1,11,3.0,0
"""


def create_event_log(directory, text=SAMPLE_EVENT_LOG, name="events.csv"):
    """Write an event-log file and return its path."""
    path = Path(directory) / name
    path.write_text(text, encoding="utf-8")
    return path


def create_tiny_dataset(n_features=2, seed=0):
    """5 users, 5 items, 12 events over t in [0, 10]."""
    rng = np.random.default_rng(seed)
    users = np.array([0, 1, 2, 3, 4, 0, 1, 2, 3, 4, 0, 2])
    items = np.array([0, 1, 2, 3, 4, 1, 2, 3, 4, 0, 2, 4])
    timestamps = np.linspace(0.0, 10.0, users.shape[0])
    return Dataset(
        users=users,
        items=items,
        timestamps=timestamps,
        features=rng.normal(scale=0.5, size=(users.shape[0], n_features)),
        n_users=5,
        n_items=5,
        user_ids=np.arange(5),
        item_ids=np.arange(5),
    )


def create_planted_dataset(n_events=600, n_users=20, n_items=20, n_clusters=4, noise=0.1, seed=0):
    """Scaled-down planted-cluster network."""
    return synth_generate(
        n_users=n_users,
        n_items=n_items,
        n_clusters=n_clusters,
        n_events=n_events,
        noise=noise,
        seed=seed,
        t_max=100.0,
    )


def create_small_config(output_dir=None, **overrides):
    """RunConfig small enough for unit tests."""
    values = dict(
        dim=4,
        intervals=4,
        epochs=1,
        lr=0.01,
        ricci_width=8,
        max_edges=16,
        negatives=3,
        sample_ratio=1.0,
        dropout=0.0,
        curvature_iterations=4,
    )
    if output_dir is not None:
        values["output_dir"] = str(output_dir)
    values.update(overrides)
    return RunConfig(**values)


# graphs

def create_triangle_graph():
    g = SimpleGraph()
    g.add_edges_from([(0, 1), (1, 2), (0, 2)])
    return g


def create_path_graph(n=4):
    g = SimpleGraph()
    g.add_edges_from((i, i + 1) for i in range(n - 1))
    return g


def create_grid_graph(rows=3, cols=3):
    g = SimpleGraph()
    for u, v in nx.grid_2d_graph(rows, cols).edges():
        g.add_edge(u[0] * cols + u[1], v[0] * cols + v[1])
    return g


def create_tree_graph(branching=3, depth=3):
    g = SimpleGraph()
    g.add_edges_from(nx.balanced_tree(branching, depth).edges())
    return g


def create_cycle_graph(n=6):
    g = SimpleGraph()
    g.add_edges_from((i, (i + 1) % n) for i in range(n))
    return g


def create_sphere_points(n=200, kappa=1.0, seed=0):
    """Points spread over a cap of the stereographic sphere of curvature ``kappa``."""
    generator = torch.Generator().manual_seed(seed)
    directions = torch.randn(n, 3, generator=generator, dtype=torch.float64)
    directions = directions / directions.norm(dim=-1, keepdim=True)
    angles = torch.rand(n, 1, generator=generator, dtype=torch.float64) * (math.pi / 3)
    return directions * torch.tan(angles / 2) / math.sqrt(kappa)
