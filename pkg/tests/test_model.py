"""
Tests for the co-evolving network building blocks.
"""

import math

import numpy as np
import pytest
import torch

from sin_coevolve.curvature import build_cooccurrence_subgraph, observed_curvature, ricci_vector
from sin_coevolve.data import IntervalBatch, interval_partition, synth_generate
from sin_coevolve.errors import DimensionMismatchError, SinError
from sin_coevolve.geometry import distance, exp_map0, map_between
from sin_coevolve.model import (
    CoEvolvingGNN,
    CurvatureEstimator,
    CurvaturePair,
    EmbeddingTable,
    advance_interval,
    aggregate_interactions,
    aggregate_item,
    aggregate_user,
    estimate_curvature,
    integrate_interaction,
    predict_scores,
    score_matrix,
    stack_layers,
    time_encode,
)
from test_data.sample_interactions import create_tiny_dataset


def make_model(**overrides):
    options = dict(n_users=5, n_items=5, dim=4, feature_dim=2, ricci_width=8, dropout=0.0, seed=0)
    options.update(overrides)
    return CoEvolvingGNN(**options)


class TestTimeEncoding:
    """Test suite for the harmonic time encoders."""

    def setup_method(self):
        """Set up test fixtures."""
        self.omega = torch.tensor([1.0, 0.1, 0.01], dtype=torch.float64)
        self.theta = torch.zeros(3, dtype=torch.float64)

    def test_cosine_shape_and_scale(self):
        phi = time_encode(torch.tensor([0.0, 2.0], dtype=torch.float64), self.omega, self.theta, "cosine")
        assert phi.shape == (2, 3)
        assert torch.allclose(phi[0], torch.full((3,), math.sqrt(1 / 3), dtype=torch.float64))

    def test_fourier_is_shift_invariant(self):
        t1 = torch.tensor([0.5, 3.0], dtype=torch.float64)
        t2 = torch.tensor([1.5, 7.0], dtype=torch.float64)
        base = (time_encode(t1, self.omega, self.theta, "fourier")
                * time_encode(t2, self.omega, self.theta, "fourier")).sum(-1)
        shifted = (time_encode(t1 + 11.0, self.omega, self.theta, "fourier")
                   * time_encode(t2 + 11.0, self.omega, self.theta, "fourier")).sum(-1)
        assert torch.allclose(base, shifted, atol=1e-12)

    def test_fourier_unit_norm(self):
        phi = time_encode(torch.tensor([4.2], dtype=torch.float64), self.omega, self.theta, "fourier")
        assert phi.shape == (1, 6)
        assert float((phi * phi).sum()) == pytest.approx(1.0)

    def test_unknown_mode(self):
        with pytest.raises(SinError) as exc_info:
            time_encode(torch.zeros(1, dtype=torch.float64), self.omega, self.theta, "wavelet")
        assert exc_info.value.code == "INVALID_ENCODER"


class TestInteractionIntegration:
    """Test suite for interaction embeddings and pooling."""

    def test_width_mismatch(self):
        w7 = torch.zeros(4, 5, dtype=torch.float64)
        omega = torch.ones(4, dtype=torch.float64)
        with pytest.raises(DimensionMismatchError):
            integrate_interaction(torch.zeros(3, 2), torch.zeros(3), w7, omega, torch.zeros(4, dtype=torch.float64))

    def test_linear_form(self):
        w7 = torch.eye(3, dtype=torch.float64)
        omega = torch.ones(2, dtype=torch.float64)
        out = integrate_interaction(torch.tensor([[2.0]]), torch.zeros(1), w7, omega,
                                    torch.zeros(2, dtype=torch.float64), activation=None)
        expected = torch.tensor([[2.0, math.sqrt(0.5), math.sqrt(0.5)]], dtype=torch.float64)
        assert torch.allclose(out, expected)

    def test_pooling_modes(self):
        e = torch.tensor([[1.0, 0.0], [3.0, 2.0], [5.0, 5.0]], dtype=torch.float64)
        index = torch.tensor([0, 0, 2])
        late = aggregate_interactions(e, index, 4, "late", lambda v: v)
        early = aggregate_interactions(e, index, 4, "early", lambda v: v)
        expected = torch.tensor([[2.0, 1.0], [0.0, 0.0], [5.0, 5.0], [0.0, 0.0]], dtype=torch.float64)
        assert torch.equal(late, expected)
        assert torch.equal(early, expected)

    def test_pooling_order_matters_for_nonlinear_mlp(self):
        e = torch.tensor([[1.0], [3.0]], dtype=torch.float64)
        index = torch.tensor([0, 0])
        late = aggregate_interactions(e, index, 1, "late", torch.square)
        early = aggregate_interactions(e, index, 1, "early", torch.square)
        assert float(late) == 5.0
        assert float(early) == 4.0

    def test_unknown_fusion(self):
        with pytest.raises(SinError):
            aggregate_interactions(torch.zeros(1, 2), torch.tensor([0]), 1, "middle", lambda v: v)


class TestCurvatureEstimator:
    """Test suite for the Ricci-to-curvature estimator."""

    def test_shapes(self):
        estimator = CurvatureEstimator(8).double()
        assert estimator(torch.zeros(8, dtype=torch.float64)).shape == ()
        assert estimator(torch.zeros(3, 8, dtype=torch.float64)).shape == (3,)
        assert float(estimate_curvature(estimator, [0.0] * 8)) == pytest.approx(float(estimator(torch.zeros(8, dtype=torch.float64))))

    def test_width_mismatch(self):
        estimator = CurvatureEstimator(8).double()
        with pytest.raises(DimensionMismatchError):
            estimator(torch.zeros(6, dtype=torch.float64))

    def test_identity_quadratic_form(self):
        estimator = CurvatureEstimator(4).double()
        estimator.mlp = torch.nn.Identity()
        with torch.no_grad():
            estimator.w8.copy_(torch.eye(4, dtype=torch.float64))
        r = torch.tensor([0.5, -1.0, 2.0, 0.0], dtype=torch.float64)
        assert float(estimator(r)) == pytest.approx(5.25)

    def test_padding_ignored_when_pad_columns_zeroed(self):
        estimator = CurvatureEstimator(8).double()
        with torch.no_grad():
            estimator.mlp[0].weight[:, 5:] = 0.0
        r = torch.tensor([0.3, -0.2, 0.1, 0.4, -0.5, 0.0, 0.0, 0.0], dtype=torch.float64)
        padded = r.clone()
        padded[5:] = torch.tensor([0.9, -0.7, 0.2], dtype=torch.float64)
        assert float(estimator(r)) == float(estimator(padded))

    def test_fits_observed_targets(self):
        ds = synth_generate(n_users=20, n_items=20, n_clusters=4, n_events=400, seed=0)
        vectors, targets = [], []
        for batch in interval_partition(ds, 4):
            for side in ("user", "item"):
                graph = build_cooccurrence_subgraph(batch.users, batch.items, side, seed=batch.index)
                vectors.append(ricci_vector(graph, max_edges=32, seed=batch.index, width=16).values)
                targets.append(observed_curvature(graph, iterations=5, seed=batch.index))
        ricci = torch.tensor(vectors, dtype=torch.float64)
        kappa_o = torch.tensor(targets, dtype=torch.float64)
        assert torch.unique(ricci, dim=0).shape[0] == len(vectors)
        assert float(kappa_o.abs().max()) > 0

        torch.manual_seed(0)
        estimator = CurvatureEstimator(16).double()
        optimizer = torch.optim.Adam(estimator.parameters(), lr=0.02)

        def loss():
            return ((estimator(ricci) - kappa_o) ** 2).mean()

        initial = float(loss())
        for _ in range(200):
            optimizer.zero_grad()
            current = loss()
            current.backward()
            optimizer.step()
        assert float(loss()) <= 0.1 * initial


class TestCoEvolvingGNN:
    """Test suite for the interval forward pass."""

    def setup_method(self):
        """Set up test fixtures."""
        self.ds = create_tiny_dataset()
        self.batches = interval_partition(self.ds, 6)
        self.model = make_model()
        self.table = self.model.initial_table(seed=0)

    def test_seeded_initialization_leaves_global_rng(self):
        torch.manual_seed(5)
        expected = torch.rand(1)
        torch.manual_seed(5)
        first = make_model(seed=3)
        drawn = torch.rand(1)
        second = make_model(seed=3)
        assert torch.equal(drawn, expected)
        for (name, a), (_, b) in zip(first.named_parameters(), second.named_parameters()):
            assert torch.equal(a, b), name

    def test_parameters_are_float64(self):
        assert all(p.dtype == torch.float64 for p in self.model.parameters())
        assert set(self.model.parameter_set()) >= {"m1", "m6", "w7", "omega", "theta", "user_curvnn.w8"}

    def test_fourier_needs_even_dim(self):
        with pytest.raises(DimensionMismatchError):
            make_model(dim=5, encoder="fourier")

    def test_initial_table(self):
        assert self.table.users.shape == (5, 4)
        assert self.table.kappa_u == -1.0
        assert float(self.table.users.norm(dim=-1).max()) < 1.0
        features = np.array([[0.3, 0.1], [0.0, 0.2], [0.1, 0.1], [0.0, 0.0], [0.2, 0.0]])
        table = self.model.initial_table(user_features=features, kappa=0.0)
        assert torch.equal(table.users[:, :2], torch.tensor(features))
        assert torch.equal(table.users[:, 2:], torch.zeros(5, 2, dtype=torch.float64))

    def test_inactive_entities_carried(self):
        batch = self.batches[0]
        out = self.model.forward_interval(batch, self.table)
        inactive_users = [u for u in range(5) if u not in set(batch.users.tolist())]
        inactive_items = [i for i in range(5) if i not in set(batch.items.tolist())]
        assert torch.equal(out.users[inactive_users], self.table.users[inactive_users])
        assert torch.equal(out.items[inactive_items], self.table.items[inactive_items])
        active = sorted(set(batch.users.tolist()))
        assert not torch.allclose(out.users[active], self.table.users[active])

    def test_last_times_updated(self):
        batch = self.batches[1]
        out = self.model.forward_interval(batch, self.table)
        for user, t in zip(batch.users, batch.timestamps):
            assert out.last_t_user[user] == t
        assert np.isnan(self.table.last_t_user).all()
        assert out.entity_times("user", -1.0)[0].item() == -1.0

    def test_points_stay_in_ball(self):
        table = self.table
        for batch in self.batches:
            table = self.model.forward_interval(batch, table)
        assert float(table.users.norm(dim=-1).max()) < 1.0
        assert float(table.items.norm(dim=-1).max()) < 1.0

    def test_flat_update_composition(self):
        with torch.no_grad():
            for name in ("m1", "m2", "m3"):
                getattr(self.model, name).copy_(torch.eye(4, dtype=torch.float64))
        table = self.model.initial_table(kappa=0.0, seed=1)
        batch = self.batches[0]
        out = self.model.forward_interval(batch, table)

        e = self.model.interaction_embeddings(torch.as_tensor(batch.features[:1]), torch.as_tensor(batch.timestamps[:1]))
        pooled = self.model.fusion_mlp(e)[0]
        user, item = int(batch.users[0]), int(batch.items[0])
        expected = table.users[user] + pooled + table.items[item]
        assert torch.allclose(out.users[user], expected, atol=1e-12)

    def test_empty_batch(self):
        empty = self.batches[0].model_copy(update={
            "users": np.zeros(0, dtype=np.int64),
            "items": np.zeros(0, dtype=np.int64),
            "timestamps": np.zeros(0),
            "features": np.zeros((0, 2)),
        })
        assert self.model.forward_interval(empty, self.table) is self.table

    def test_attention_weights(self):
        model = make_model(attention=True)
        out = model.forward_interval(self.batches[2], model.initial_table())
        assert torch.isfinite(out.users).all()

    def test_layers(self):
        batch = self.batches[0]
        assert torch.equal(aggregate_user(self.model, batch, self.table), self.model.forward_interval(batch, self.table).users)
        assert torch.equal(aggregate_item(self.model, batch, self.table), self.model.forward_interval(batch, self.table).items)
        with pytest.raises(SinError) as exc_info:
            stack_layers(self.model, batch, self.table, 0)
        assert exc_info.value.code == "INVALID_LAYERS"

    def test_second_layer_reaches_two_hops(self):
        # u0 - i0 - u1: u1 sees u0 only through i0
        batch = IntervalBatch(
            index=0, t_start=1.0, t_end=2.0, start=0, stop=2,
            users=np.array([0, 1]), items=np.array([0, 0]),
            timestamps=np.array([1.0, 2.0]), features=np.zeros((2, 2))
        )
        shifted = self.table.users.clone()
        shifted[0] = shifted[0] * 0.5
        moved = EmbeddingTable(shifted, self.table.items, self.table.kappa_u, self.table.kappa_i)

        for layers, reached in ((1, False), (2, True)):
            base = stack_layers(self.model, batch, self.table, layers)
            other = stack_layers(self.model, batch, moved, layers)
            assert not torch.allclose(base.users[0], other.users[0])
            assert (not torch.allclose(base.users[1], other.users[1])) == reached
            assert torch.equal(base.users[2:], other.users[2:])

    def test_advance_interval(self):
        moved = advance_interval(self.table, CurvaturePair(kappa_u=0.5, kappa_i=-2.0))
        assert moved.kappas == CurvaturePair(kappa_u=0.5, kappa_i=-2.0)
        assert torch.allclose(moved.users, map_between(self.table.users, -1.0, 0.5))
        back = advance_interval(moved, (-1.0, -1.0))
        assert torch.allclose(back.items, self.table.items, atol=1e-9)

    def test_advance_interval_unchanged_kappa(self):
        same = advance_interval(self.table, self.table.kappas)
        assert torch.allclose(same.users, self.table.users, atol=1e-9)
        assert torch.allclose(same.items, self.table.items, atol=1e-9)


class TestScoring:
    """Test suite for item scoring."""

    def setup_method(self):
        """Set up test fixtures."""
        self.model = make_model()
        self.table = self.model.initial_table(seed=2)

    def test_shape_and_range(self):
        scores = score_matrix(self.model, self.table, np.array([0, 3]), np.array([1.0, 2.0]))
        assert scores.shape == (2, 5)
        assert (scores > 0).all()
        assert (scores <= 0.5).all()

    def test_closest_item_ranks_first(self):
        users = exp_map0(torch.tensor([[0.2, 0.0, 0.0, 0.0]], dtype=torch.float64), -1.0)
        items = exp_map0(torch.tensor([
            [0.9, 0.0, 0.0, 0.0],
            [0.21, 0.0, 0.0, 0.0],
            [-0.5, 0.0, 0.0, 0.0],
        ], dtype=torch.float64), -1.0)
        table = EmbeddingTable(users, items, -1.0, -1.0)
        model = make_model(n_users=1, n_items=3)
        scores = predict_scores(model, table, 0, 5.0, decay=True)
        assert int(scores.argmax()) == 1
        assert float(scores[1]) == pytest.approx(1 / (1 + math.exp(float(distance(users[0], items[1], -1.0)))))

    def test_kernel_scales_scores(self):
        decayed = predict_scores(self.model, self.table, 1, 3.0, decay=True)
        kernel = predict_scores(self.model, self.table, 1, 3.0)
        phi = self.model.time_encoding(torch.tensor([3.0], dtype=torch.float64))[0]
        assert torch.allclose(kernel, decayed * (phi * phi).sum())

    def test_user_mapped_across_spaces(self):
        table = advance_interval(self.table, (-0.5, -2.0))
        scores = predict_scores(self.model, table, 0, 0.0, decay=True)
        image = map_between(table.users[0], -0.5, -2.0)
        expected = torch.sigmoid(-distance(image[None, :], table.items, -2.0))
        assert torch.allclose(scores, expected)
