"""
Tests for the kappa-stereographic operations.
"""

import math

import pytest
import torch

from sin_coevolve.errors import (
    CurvatureMismatchError,
    DimensionMismatchError,
    DomainError,
    EmptyInputError,
    ZeroWeightError,
)
from sin_coevolve.geometry import (
    EPS_DOMAIN,
    ManifoldPoint,
    TangentVector,
    arctan_kappa,
    conformal_factor,
    distance,
    exp_map,
    exp_map0,
    gyromidpoint,
    log_map,
    log_map0,
    map_between,
    mobius_add,
    mobius_matvec,
    mobius_scale,
    project,
    tan_kappa,
)

KAPPAS = [-1.0, -0.5, 0.0, 0.5, 1.0]


def random_points(n, dim, kappa, radius=0.5, seed=0):
    """Points with norm below radius / sqrt|kappa| (below radius when flat)."""
    generator = torch.Generator().manual_seed(seed)
    directions = torch.randn(n, dim, generator=generator, dtype=torch.float64)
    directions = directions / directions.norm(dim=-1, keepdim=True)
    norms = torch.rand(n, 1, generator=generator, dtype=torch.float64) * radius
    scale = 1.0 / math.sqrt(abs(kappa)) if kappa != 0 else 1.0
    return directions * norms * scale


class TestScaledTangent:
    """Test suite for tan_kappa and arctan_kappa."""

    def test_origin(self):
        for kappa in KAPPAS:
            assert float(tan_kappa(0.0, kappa)) == 0.0

    def test_branches(self):
        assert float(tan_kappa(0.5, -1.0)) == pytest.approx(0.46212, abs=1e-5)
        assert float(tan_kappa(0.5, 0.0)) == 0.5
        assert float(tan_kappa(0.5, 1.0)) == pytest.approx(math.tan(0.5))

    def test_inverse_per_branch(self):
        z = torch.linspace(-0.9, 0.9, 19, dtype=torch.float64)
        for kappa in KAPPAS:
            assert torch.allclose(arctan_kappa(tan_kappa(z, kappa), kappa), z, atol=1e-12)

    def test_positive_curvature_domain(self):
        with pytest.raises(DomainError):
            tan_kappa(math.pi / 2, 1.0)

    def test_negative_curvature_inverse_domain(self):
        with pytest.raises(DomainError):
            arctan_kappa(1.0, -1.0)


class TestMobiusAddition:
    """Test suite for Mobius addition."""

    def test_identity_element(self):
        for kappa in KAPPAS:
            x = random_points(50, 3, kappa, seed=1)
            o = torch.zeros_like(x)
            assert (mobius_add(x, o, kappa) - x).abs().max() < 1e-9
            assert (mobius_add(o, x, kappa) - x).abs().max() < 1e-9

    def test_left_inverse(self):
        for kappa in KAPPAS:
            x = random_points(50, 3, kappa, seed=2)
            assert mobius_add(-x, x, kappa).abs().max() < 1e-9

    def test_flat_is_vector_sum(self):
        x = torch.tensor([0.3, -1.2], dtype=torch.float64)
        y = torch.tensor([2.0, 0.5], dtype=torch.float64)
        assert torch.equal(mobius_add(x, y, 0.0), x + y)

    def test_scalar_hyperbolic_value(self):
        x = torch.tensor([0.3, 0.0], dtype=torch.float64)
        y = torch.tensor([0.4, 0.0], dtype=torch.float64)
        result = mobius_add(x, y, -1.0)
        assert float(result[0]) == pytest.approx(0.625, abs=1e-12)
        assert float(result[0]) == pytest.approx((0.3 + 0.4) / (1 + 0.3 * 0.4), abs=1e-12)
        assert float(result[1]) == 0.0

    def test_non_commutative(self):
        x = torch.tensor([0.3, 0.1], dtype=torch.float64)
        y = torch.tensor([-0.2, 0.4], dtype=torch.float64)
        assert not torch.allclose(mobius_add(x, y, -1.0), mobius_add(y, x, -1.0))

    def test_result_stays_in_ball(self):
        x = torch.tensor([0.999, 0.0], dtype=torch.float64)
        result = mobius_add(x, x, -1.0)
        assert float(result.norm()) <= 1 - EPS_DOMAIN + 1e-12

    def test_curvature_mismatch(self):
        x = ManifoldPoint([0.1, 0.2], -1.0)
        y = ManifoldPoint([0.1, 0.2], -0.5)
        with pytest.raises(CurvatureMismatchError):
            x.add(y)

    def test_point_outside_ball(self):
        with pytest.raises(DomainError):
            ManifoldPoint([0.8, 0.8], -1.0)


class TestMobiusScaling:
    """Test suite for Mobius scaling and matrix action."""

    def test_unit_scale(self):
        for kappa in KAPPAS:
            x = random_points(20, 3, kappa, seed=3)
            assert (mobius_scale(1.0, x, kappa) - x).abs().max() < 1e-12

    def test_origin_fixed(self):
        o = torch.zeros(3, dtype=torch.float64)
        for kappa in KAPPAS:
            assert mobius_scale(2.5, o, kappa).abs().max() == 0.0

    def test_scalar_hyperbolic_value(self):
        result = mobius_scale(2.0, torch.tensor([0.5, 0.0], dtype=torch.float64), -1.0)
        assert float(result[0]) == pytest.approx(0.8, abs=1e-12)

    def test_scaling_composition(self):
        generator = torch.Generator().manual_seed(4)
        for kappa in KAPPAS:
            x = random_points(50, 3, kappa, radius=0.3, seed=5)
            r1, r2 = (0.5 + torch.rand(2, generator=generator, dtype=torch.float64)).tolist()
            nested = mobius_scale(r1, mobius_scale(r2, x, kappa), kappa)
            direct = mobius_scale(r1 * r2, x, kappa)
            assert (nested - direct).abs().max() < 1e-8

    def test_scaled_arc_leaves_domain(self):
        x = ManifoldPoint([1.0, 0.0], 1.0)
        with pytest.raises(DomainError):
            x.scale(3.0)

    def test_matvec_identity(self):
        for kappa in KAPPAS:
            x = random_points(10, 3, kappa, seed=6)
            eye = torch.eye(3, dtype=torch.float64)
            assert (mobius_matvec(eye, x, kappa) - x).abs().max() < 1e-12

    def test_matvec_flat(self):
        m = torch.tensor([[1.0, 2.0], [0.0, -1.0], [3.0, 1.0]], dtype=torch.float64)
        x = torch.tensor([0.5, -0.25], dtype=torch.float64)
        assert torch.equal(mobius_matvec(m, x, 0.0), m @ x)

    def test_matvec_origin_and_null_image(self):
        m = torch.tensor([[1.0, 1.0], [2.0, 2.0]], dtype=torch.float64)
        origin = torch.zeros(2, dtype=torch.float64)
        assert mobius_matvec(m, origin, -1.0).abs().max() == 0.0
        null = torch.tensor([0.3, -0.3], dtype=torch.float64)
        assert mobius_matvec(m, null, -1.0).abs().max() == 0.0

    def test_matvec_changes_dimension(self):
        m = torch.ones(4, 2, dtype=torch.float64)
        point = ManifoldPoint([0.2, 0.1], -1.0).matvec(m)
        assert point.dim == 4

    def test_matvec_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            mobius_matvec(torch.ones(2, 3, dtype=torch.float64), torch.ones(2, dtype=torch.float64), -1.0)


class TestExpLog:
    """Test suite for exponential and logarithmic maps."""

    def test_zero_tangent(self):
        for kappa in KAPPAS:
            x = random_points(10, 3, kappa, seed=7)
            assert (exp_map(x, torch.zeros_like(x), kappa) - x).abs().max() < 1e-12

    def test_flat_origin_is_identity(self):
        v = torch.tensor([1.5, -2.0], dtype=torch.float64)
        assert torch.equal(exp_map0(v, 0.0), v)

    def test_hyperbolic_origin_value(self):
        result = exp_map0(torch.tensor([0.5, 0.0], dtype=torch.float64), -1.0)
        assert float(result[0]) == pytest.approx(math.tanh(0.5), abs=1e-12)
        assert float(result[0]) == pytest.approx(0.46212, abs=1e-5)

    @pytest.mark.parametrize("kappa", KAPPAS)
    def test_inversion(self, kappa):
        x = random_points(1000, 3, kappa, seed=8)
        generator = torch.Generator().manual_seed(9)
        v = torch.randn(1000, 3, generator=generator, dtype=torch.float64)
        v = v / v.norm(dim=-1, keepdim=True) * torch.rand(1000, 1, generator=generator, dtype=torch.float64) * 0.5
        if kappa != 0:
            v = v / math.sqrt(abs(kappa))
        recovered = log_map(x, exp_map(x, v, kappa), kappa)
        assert (recovered - v).norm(dim=-1).max() < 1e-6

    @pytest.mark.parametrize("kappa", KAPPAS)
    def test_log_then_exp(self, kappa):
        x = random_points(200, 3, kappa, seed=10)
        y = random_points(200, 3, kappa, seed=11)
        assert (exp_map(x, log_map(x, y, kappa), kappa) - y).abs().max() < 1e-6

    def test_origin_maps_agree(self):
        v = random_points(20, 3, -1.0, seed=12)
        origin = torch.zeros_like(v)
        assert torch.allclose(exp_map(origin, v, -1.0), exp_map0(v, -1.0), atol=1e-12)
        assert torch.allclose(log_map(origin, v, -1.0), log_map0(v, -1.0), atol=1e-12)

    def test_cut_locus(self):
        x = ManifoldPoint([0.0, 0.0], 1.0)
        with pytest.raises(DomainError):
            x.exp(TangentVector([2.0, 0.0], x))

    def test_tangent_dimension(self):
        x = ManifoldPoint([0.0, 0.0], -1.0)
        with pytest.raises(DimensionMismatchError):
            TangentVector([0.1, 0.2, 0.3], x)


class TestDistance:
    """Test suite for geodesic distance and the conformal factor."""

    def test_coincident_points(self):
        for kappa in KAPPAS:
            x = random_points(20, 3, kappa, seed=13)
            assert distance(x, x, kappa).abs().max() < 1e-9

    def test_hyperbolic_value(self):
        o = torch.zeros(2, dtype=torch.float64)
        y = torch.tensor([0.5, 0.0], dtype=torch.float64)
        assert float(distance(o, y, -1.0)) == pytest.approx(2 * math.atanh(0.5), abs=1e-12)
        assert float(distance(o, y, -1.0)) == pytest.approx(1.09861, abs=1e-5)

    def test_flat_limit(self):
        x = torch.tensor([0.1, 0.2], dtype=torch.float64)
        y = torch.tensor([0.4, -0.2], dtype=torch.float64)
        assert float(distance(x, y, 0.0)) == pytest.approx(2 * float((x - y).norm()))
        assert float(distance(x, y, -1e-9)) == pytest.approx(2 * float((x - y).norm()))

    @pytest.mark.parametrize("kappa", KAPPAS)
    def test_metric_axioms(self, kappa):
        x = random_points(1000, 3, kappa, seed=14)
        y = random_points(1000, 3, kappa, seed=15)
        z = random_points(1000, 3, kappa, seed=16)
        dxy = distance(x, y, kappa)
        assert (dxy - distance(y, x, kappa)).abs().max() < 1e-9
        assert (dxy >= 0).all()
        assert (distance(x, z, kappa) <= dxy + distance(y, z, kappa) + 1e-9).all()

    def test_point_distance_checks_curvature(self):
        with pytest.raises(CurvatureMismatchError):
            ManifoldPoint([0.1], -1.0).distance(ManifoldPoint([0.1], 1.0))

    def test_conformal_factor(self):
        for kappa in KAPPAS:
            assert float(conformal_factor(torch.zeros(3, dtype=torch.float64), kappa)) == 2.0
        x = torch.tensor([0.5, 0.0], dtype=torch.float64)
        assert float(conformal_factor(x, 0.0)) == 2.0
        assert float(conformal_factor(x, -1.0)) == pytest.approx(2 / 0.75)

    def test_projection_margin(self):
        x = torch.tensor([[3.0, 4.0]], dtype=torch.float64)
        projected = project(x, -4.0)
        assert float(projected.norm()) == pytest.approx((1 - EPS_DOMAIN) / 2.0)


class TestMapBetween:
    """Test suite for moving points between curvatures."""

    def test_same_curvature(self):
        x = random_points(10, 3, -1.0, seed=17)
        assert torch.equal(map_between(x, -1.0, -1.0), x)

    def test_origin_fixed(self):
        o = torch.zeros(3, dtype=torch.float64)
        for kappa in KAPPAS:
            assert map_between(o, -1.0, kappa).abs().max() == 0.0

    def test_scalar_value(self):
        result = map_between(torch.tensor([0.5, 0.0], dtype=torch.float64), -1.0, 0.0)
        assert float(result[0]) == pytest.approx(math.atanh(0.5), abs=1e-12)

    def test_round_trip(self):
        for k1 in KAPPAS:
            for k2 in KAPPAS:
                x = random_points(100, 3, k1, radius=0.4, seed=18)
                there = map_between(x, k1, k2)
                back = map_between(there, k2, k1)
                assert (back - x).norm(dim=-1).max() < 1e-6

    def test_point_to_curvature(self):
        moved = ManifoldPoint([0.5, 0.0], -1.0).to_curvature(0.0)
        assert moved.kappa == 0.0
        assert moved.coords[0].item() == pytest.approx(math.atanh(0.5))


class TestGyromidpoint:
    """Test suite for weighted gyromidpoints."""

    def test_single_point(self):
        x = torch.tensor([[0.5]], dtype=torch.float64)
        assert float(gyromidpoint(x, None, -1.0)[0]) == pytest.approx(0.5, abs=1e-12)

    def test_symmetric_pair(self):
        x = torch.tensor([0.3, -0.2], dtype=torch.float64)
        for kappa in [-1.0, 0.0, 0.5]:
            mid = gyromidpoint(torch.stack([x, -x]), None, kappa)
            assert mid.abs().max() < 1e-12

    def test_flat_pair(self):
        points = torch.tensor([[0.2, 0.4], [1.0, -0.6]], dtype=torch.float64)
        mid = gyromidpoint(points, torch.tensor([1.0, 1.0], dtype=torch.float64), 0.0)
        assert torch.allclose(mid, points.mean(dim=0), atol=1e-12)

    def test_permutation_and_rescaling(self):
        points = random_points(6, 3, -1.0, seed=19)
        weights = torch.tensor([1.0, 2.0, 0.5, 0.0, 3.0, 1.0], dtype=torch.float64)
        base = gyromidpoint(points, weights, -1.0)
        order = torch.tensor([5, 3, 1, 0, 4, 2])
        assert torch.allclose(gyromidpoint(points[order], weights[order], -1.0), base, atol=1e-12)
        assert torch.allclose(gyromidpoint(points, 7.0 * weights, -1.0), base, atol=1e-12)

    def test_lies_between_points(self):
        points = torch.tensor([[0.1, 0.0], [0.5, 0.0]], dtype=torch.float64)
        mid = gyromidpoint(points, None, -1.0)
        assert 0.1 < float(mid[0]) < 0.5
        d0 = float(distance(mid, points[0], -1.0))
        d1 = float(distance(mid, points[1], -1.0))
        assert d0 == pytest.approx(d1, abs=1e-9)

    def test_empty_set(self):
        with pytest.raises(EmptyInputError):
            gyromidpoint(torch.zeros(0, 2, dtype=torch.float64), None, -1.0)
        with pytest.raises(EmptyInputError):
            ManifoldPoint.midpoint([])

    def test_zero_weights(self):
        points = random_points(3, 2, -1.0, seed=20)
        with pytest.raises(ZeroWeightError):
            gyromidpoint(points, torch.zeros(3, dtype=torch.float64), -1.0)

    def test_midpoint_checks_curvature(self):
        with pytest.raises(CurvatureMismatchError):
            ManifoldPoint.midpoint([ManifoldPoint([0.1], -1.0), ManifoldPoint([0.2], 0.0)])
