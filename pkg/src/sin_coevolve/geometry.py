"""
kappa-stereographic gyrovector calculus.

One set of formulas covers hyperbolic (kappa < 0), flat (kappa = 0) and
spherical (kappa > 0) spaces. Tensor functions take the curvature as the
``k`` keyword and broadcast over leading dimensions; ``ManifoldPoint`` and
``TangentVector`` wrap single vectors with the checks the tensor layer skips.

All computations run in float64.
"""

import math
from typing import Optional, Sequence, Union

import torch

from .diffengine import DTYPE, register_primitive
from .errors import (
    CurvatureMismatchError,
    DimensionMismatchError,
    DomainError,
    EmptyInputError,
    ZeroWeightError,
)


EPS_KAPPA = 1e-7     # below this |kappa| the flat limit formulas are used
EPS_DOMAIN = 1e-5    # projection margin and spherical arc margin
EPS_DEN = 1e-15      # smallest admissible Mobius denominator
MIN_NORM = 1e-15
HALF_PI = math.pi / 2

Curvature = Union[float, torch.Tensor]


def as_tensor(x: Union[Sequence[float], torch.Tensor]) -> torch.Tensor:
    """Coerce to a float64 tensor without copying float64 inputs."""
    return torch.as_tensor(x, dtype=DTYPE)


def _kappa(k: Curvature) -> float:
    value = float(k)
    if not math.isfinite(value):
        raise DomainError("Curvature must be finite", details={"kappa": value})
    return value


def is_flat(k: Curvature) -> bool:
    return abs(float(k)) < EPS_KAPPA


def _norm(x: torch.Tensor) -> torch.Tensor:
    return x.norm(dim=-1, keepdim=True).clamp_min(MIN_NORM)


# scaled trigonometry

@register_primitive()
def tan_k(x: torch.Tensor, k: Curvature) -> torch.Tensor:
    """tan_kappa(sqrt|k| x) / sqrt|k|, the identity in the flat limit."""
    k = _kappa(k)
    if is_flat(k):
        return x
    sk = math.sqrt(abs(k))
    if k < 0:
        return torch.tanh(sk * x) / sk
    arc = (sk * x).clamp(-(HALF_PI - EPS_DOMAIN), HALF_PI - EPS_DOMAIN)
    return torch.tan(arc) / sk


@register_primitive()
def artan_k(x: torch.Tensor, k: Curvature) -> torch.Tensor:
    """Inverse of ``tan_k``."""
    k = _kappa(k)
    if is_flat(k):
        return x
    sk = math.sqrt(abs(k))
    if k < 0:
        return torch.atanh((sk * x).clamp(-1 + MIN_NORM, 1 - MIN_NORM)) / sk
    return torch.atan(sk * x) / sk


def tan_kappa(z: Union[float, torch.Tensor], kappa: Curvature) -> torch.Tensor:
    """
    Curvature-dependent tangent: tanh for kappa < 0, identity at 0, tan for kappa > 0.

    Raises:
        DomainError: for kappa > 0 and |z| >= pi/2
    """
    z = as_tensor(z)
    kappa = _kappa(kappa)
    if is_flat(kappa):
        return z
    if kappa < 0:
        return torch.tanh(z)
    if bool((z.abs() >= HALF_PI).any()):
        raise DomainError(
            "tan_kappa argument outside (-pi/2, pi/2) for positive curvature",
            details={"kappa": kappa, "max_abs_arg": float(z.abs().max())}
        )
    return torch.tan(z.clamp(-(HALF_PI - EPS_DOMAIN), HALF_PI - EPS_DOMAIN))


def arctan_kappa(z: Union[float, torch.Tensor], kappa: Curvature) -> torch.Tensor:
    """
    Inverse of ``tan_kappa`` on each branch.

    Raises:
        DomainError: for kappa < 0 and |z| >= 1
    """
    z = as_tensor(z)
    kappa = _kappa(kappa)
    if is_flat(kappa):
        return z
    if kappa > 0:
        return torch.atan(z)
    if bool((z.abs() >= 1).any()):
        raise DomainError(
            "arctan_kappa argument outside (-1, 1) for negative curvature",
            details={"kappa": kappa, "max_abs_arg": float(z.abs().max())}
        )
    return torch.atanh(z)


# projection

def project(x: torch.Tensor, k: Curvature) -> torch.Tensor:
    """Pull points of a hyperbolic ball back inside radius (1 - EPS_DOMAIN)/sqrt(-k)."""
    k = _kappa(k)
    if k >= 0 or is_flat(k):
        return x
    maxnorm = (1 - EPS_DOMAIN) / math.sqrt(-k)
    norm = _norm(x)
    cond = norm > maxnorm
    projected = x / norm * maxnorm
    return torch.where(cond, projected, x)


# gyrovector operations

@register_primitive()
def mobius_add(x: torch.Tensor, y: torch.Tensor, k: Curvature) -> torch.Tensor:
    k = _kappa(k)
    if is_flat(k):
        return x + y
    x2 = x.pow(2).sum(dim=-1, keepdim=True)
    y2 = y.pow(2).sum(dim=-1, keepdim=True)
    xy = (x * y).sum(dim=-1, keepdim=True)
    num = (1 - 2 * k * xy - k * y2) * x + (1 + k * x2) * y
    denom = 1 - 2 * k * xy + k ** 2 * x2 * y2
    return project(num / denom.clamp_min(EPS_DEN), k)


def mobius_denominator(x: torch.Tensor, y: torch.Tensor, k: Curvature) -> torch.Tensor:
    k = _kappa(k)
    x2 = x.pow(2).sum(dim=-1, keepdim=True)
    y2 = y.pow(2).sum(dim=-1, keepdim=True)
    xy = (x * y).sum(dim=-1, keepdim=True)
    return 1 - 2 * k * xy + k ** 2 * x2 * y2


@register_primitive()
def mobius_scale(r: Union[float, torch.Tensor], x: torch.Tensor, k: Curvature) -> torch.Tensor:
    k = _kappa(k)
    if is_flat(k):
        return r * x
    x_norm = _norm(x)
    res = tan_k(r * artan_k(x_norm, k), k) * (x / x_norm)
    return project(res, k)


@register_primitive()
def mobius_matvec(m: torch.Tensor, x: torch.Tensor, k: Curvature) -> torch.Tensor:
    """Mobius matrix action M (x) x, with x of shape (..., n) and M of shape (m, n)."""
    k = _kappa(k)
    if m.shape[-1] != x.shape[-1]:
        raise DimensionMismatchError(
            f"Matrix with {m.shape[-1]} columns applied to a {x.shape[-1]}-dimensional point",
            details={"matrix_shape": list(m.shape), "point_dim": x.shape[-1]}
        )
    mx = x @ m.transpose(-1, -2)
    if is_flat(k):
        return mx
    x_norm = _norm(x)
    mx_norm = _norm(mx)
    res = tan_k(mx_norm / x_norm * artan_k(x_norm, k), k) * (mx / mx_norm)
    zero = (mx == 0).all(dim=-1, keepdim=True)
    res = torch.where(zero, torch.zeros_like(res), res)
    return project(res, k)


@register_primitive()
def conformal_factor(x: torch.Tensor, k: Curvature) -> torch.Tensor:
    k = _kappa(k)
    if is_flat(k):
        return torch.full_like(x[..., :1], 2.0)
    return 2 / (1 + k * x.pow(2).sum(dim=-1, keepdim=True))


@register_primitive()
def exp_map(x: torch.Tensor, u: torch.Tensor, k: Curvature) -> torch.Tensor:
    k = _kappa(k)
    if is_flat(k):
        return x + u
    u_norm = _norm(u)
    second = tan_k(conformal_factor(x, k) / 2 * u_norm, k) * (u / u_norm)
    return mobius_add(x, second, k)


@register_primitive()
def log_map(x: torch.Tensor, y: torch.Tensor, k: Curvature) -> torch.Tensor:
    k = _kappa(k)
    if is_flat(k):
        return y - x
    sub = mobius_add(-x, y, k)
    sub_norm = _norm(sub)
    return 2 / conformal_factor(x, k) * artan_k(sub_norm, k) * (sub / sub_norm)


@register_primitive()
def exp_map0(u: torch.Tensor, k: Curvature) -> torch.Tensor:
    k = _kappa(k)
    if is_flat(k):
        return u
    u_norm = _norm(u)
    return project(tan_k(u_norm, k) * (u / u_norm), k)


@register_primitive()
def log_map0(y: torch.Tensor, k: Curvature) -> torch.Tensor:
    k = _kappa(k)
    if is_flat(k):
        return y
    y_norm = _norm(y)
    return artan_k(y_norm, k) * (y / y_norm)


@register_primitive()
def distance(x: torch.Tensor, y: torch.Tensor, k: Curvature) -> torch.Tensor:
    """Geodesic distance, shape (...,); 2||x - y|| in the flat limit."""
    k = _kappa(k)
    if is_flat(k):
        return 2 * (y - x).norm(dim=-1)
    return 2 * artan_k(mobius_add(-x, y, k).norm(dim=-1), k)


@register_primitive()
def map_between(x: torch.Tensor, k1: Curvature, k2: Curvature) -> torch.Tensor:
    """Carry points from curvature k1 to k2 through the tangent space at the origin."""
    if float(k1) == float(k2):
        return x
    return exp_map0(log_map0(x, k1), k2)


def antipode(x: torch.Tensor, k: Curvature) -> torch.Tensor:
    """Antipodal point on the sphere; plain negation for k <= 0."""
    k = _kappa(k)
    if k <= 0 or is_flat(k):
        return -x
    return -x / (k * x.pow(2).sum(dim=-1, keepdim=True).clamp_min(MIN_NORM))


@register_primitive()
def weighted_midpoints(weights: torch.Tensor, points: torch.Tensor, k: Curvature) -> torch.Tensor:
    """
    Row-wise weighted gyromidpoints.

    Args:
        weights: (A, N) non-negative weights, one midpoint per row
        points: (N, d) points at curvature k

    Returns:
        (A, d) midpoints; rows without weight map to the origin
    """
    k = _kappa(k)
    gamma = conformal_factor(points, k)                         # (N, 1)
    nominator = weights @ (gamma * points)                      # (A, d)
    denominator = weights @ (gamma - 1)                         # (A, 1)
    denominator = torch.where(
        denominator.abs() < 1e-10,
        torch.full_like(denominator, 1e-10),
        denominator
    )
    two_mean = nominator / denominator
    mean = mobius_scale(0.5, two_mean, k)
    if k > 0 and not is_flat(k):
        # pick whichever of the mean and its antipode is closer on average
        other = antipode(mean, k)
        spread = (weights * distance(mean[:, None, :], points[None, :, :], k)).sum(dim=-1)
        other_spread = (weights * distance(other[:, None, :], points[None, :, :], k)).sum(dim=-1)
        mean = torch.where((other_spread < spread)[:, None], other, mean)
    return mean


@register_primitive()
def gyromidpoint(points: torch.Tensor, weights: Optional[torch.Tensor], k: Curvature) -> torch.Tensor:
    """
    Weighted gyromidpoint of (N, d) points.

    Raises:
        EmptyInputError: no points
        ZeroWeightError: all weights zero
        DomainError: a negative weight
    """
    if points.shape[0] == 0:
        raise EmptyInputError("Gyromidpoint of an empty point set")
    if weights is None:
        weights = torch.ones(points.shape[0], dtype=points.dtype)
    weights = as_tensor(weights)
    if bool((weights < 0).any()):
        raise DomainError("Gyromidpoint weights must be non-negative", details={"weights": weights.tolist()})
    if float(weights.sum()) == 0.0:
        raise ZeroWeightError("Gyromidpoint weights are all zero")
    return weighted_midpoints(weights[None, :], points, k)[0]


def geodesic_midpoint(b: torch.Tensor, c: torch.Tensor, k: Curvature) -> torch.Tensor:
    """Midpoint of the geodesic segment from b to c."""
    return mobius_add(b, mobius_scale(0.5, mobius_add(-b, c, k), k), k)


# typed layer

def _same_kappa(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=0.0, abs_tol=1e-12)


class ManifoldPoint:
    """A vector tagged with the curvature of its resident space."""

    __slots__ = ("coords", "kappa")

    def __init__(self, coords: Union[Sequence[float], torch.Tensor], kappa: float):
        coords = as_tensor(coords)
        if coords.dim() != 1:
            raise DimensionMismatchError(
                "ManifoldPoint coordinates must be a vector",
                details={"shape": list(coords.shape)}
            )
        kappa = _kappa(kappa)
        if kappa < 0 and not is_flat(kappa) and float(-kappa * coords.pow(2).sum()) >= 1.0:
            raise DomainError(
                "Point lies outside the hyperbolic ball",
                details={"kappa": kappa, "norm": float(coords.norm())}
            )
        self.coords = coords
        self.kappa = kappa

    @classmethod
    def origin(cls, dim: int, kappa: float) -> "ManifoldPoint":
        return cls(torch.zeros(dim, dtype=DTYPE), kappa)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def _check(self, other: "ManifoldPoint") -> None:
        if not _same_kappa(self.kappa, other.kappa):
            raise CurvatureMismatchError(
                f"Points live at different curvatures {self.kappa} and {other.kappa}",
                details={"kappa_left": self.kappa, "kappa_right": other.kappa}
            )
        if self.dim != other.dim:
            raise DimensionMismatchError(
                f"Points have different dimensions {self.dim} and {other.dim}",
                details={"dim_left": self.dim, "dim_right": other.dim}
            )

    def __neg__(self) -> "ManifoldPoint":
        return ManifoldPoint(-self.coords, self.kappa)

    def add(self, other: "ManifoldPoint") -> "ManifoldPoint":
        """Mobius addition self (+) other."""
        self._check(other)
        denom = mobius_denominator(self.coords, other.coords, self.kappa)
        if float(denom.abs()) < EPS_DEN:
            raise DomainError(
                "Mobius addition denominator vanishes",
                details={"kappa": self.kappa, "denominator": float(denom)}
            )
        return ManifoldPoint(mobius_add(self.coords, other.coords, self.kappa), self.kappa)

    def scale(self, r: float) -> "ManifoldPoint":
        """Mobius scaling r (x) self."""
        if self.kappa > 0 and not is_flat(self.kappa):
            arc = abs(r) * float(torch.atan(math.sqrt(self.kappa) * self.coords.norm()))
            if arc >= HALF_PI:
                raise DomainError(
                    "Scaled arc leaves the tangent domain",
                    details={"kappa": self.kappa, "r": r, "arc": arc}
                )
        return ManifoldPoint(mobius_scale(r, self.coords, self.kappa), self.kappa)

    def matvec(self, m: Union[Sequence[Sequence[float]], torch.Tensor]) -> "ManifoldPoint":
        """Mobius matrix action M (x) self."""
        return ManifoldPoint(mobius_matvec(as_tensor(m), self.coords, self.kappa), self.kappa)

    def conformal_factor(self) -> float:
        return float(conformal_factor(self.coords, self.kappa))

    def exp(self, v: "TangentVector") -> "ManifoldPoint":
        """Exponential map at self."""
        if v.dim != self.dim:
            raise DimensionMismatchError(
                "Tangent vector dimension differs from its base point",
                details={"point_dim": self.dim, "vector_dim": v.dim}
            )
        if self.kappa > 0 and not is_flat(self.kappa):
            arc = self.conformal_factor() / 2 * float(v.coords.norm()) * math.sqrt(self.kappa)
            if arc >= HALF_PI:
                raise DomainError(
                    "Geodesic passes the cut locus",
                    details={"kappa": self.kappa, "arc": arc}
                )
        return ManifoldPoint(exp_map(self.coords, v.coords, self.kappa), self.kappa)

    def log(self, other: "ManifoldPoint") -> "TangentVector":
        """Logarithmic map at self."""
        self._check(other)
        return TangentVector(log_map(self.coords, other.coords, self.kappa), self)

    def distance(self, other: "ManifoldPoint") -> float:
        self._check(other)
        return float(distance(self.coords, other.coords, self.kappa))

    def to_curvature(self, kappa: float) -> "ManifoldPoint":
        """Image of self in the space of curvature ``kappa``."""
        return ManifoldPoint(map_between(self.coords, self.kappa, _kappa(kappa)), kappa)

    @classmethod
    def midpoint(
        cls,
        points: Sequence["ManifoldPoint"],
        weights: Optional[Sequence[float]] = None
    ) -> "ManifoldPoint":
        """Weighted gyromidpoint of points sharing one curvature."""
        if len(points) == 0:
            raise EmptyInputError("Gyromidpoint of an empty point set")
        first = points[0]
        for point in points[1:]:
            first._check(point)
        stacked = torch.stack([p.coords for p in points])
        w = None if weights is None else as_tensor(weights)
        return cls(gyromidpoint(stacked, w, first.kappa), first.kappa)

    def __repr__(self) -> str:
        return f"ManifoldPoint({self.coords.tolist()}, kappa={self.kappa})"


class TangentVector:
    """A vector in the tangent space at ``base``."""

    __slots__ = ("coords", "base")

    def __init__(self, coords: Union[Sequence[float], torch.Tensor], base: ManifoldPoint):
        coords = as_tensor(coords)
        if coords.shape != base.coords.shape:
            raise DimensionMismatchError(
                "Tangent vector dimension differs from its base point",
                details={"vector_shape": list(coords.shape), "point_dim": base.dim}
            )
        self.coords = coords
        self.base = base

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def __repr__(self) -> str:
        return f"TangentVector({self.coords.tolist()}, base={self.base!r})"
